use crate::cloud::PointCloud;
use crate::diagram::{Feature, PersistenceDiagram};
use crate::error::{Result, TopoError};

/// Default lifetime below which features are ignored by losses and
/// gradients.
pub const EPS_MIN: f64 = 1e-4;

/// Finite features at least `eps_min` long, with their indices in `pd`.
pub fn active_features(pd: &PersistenceDiagram, eps_min: f64) -> Vec<(usize, &Feature)> {
    pd.features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_finite() && f.lifetime() >= eps_min)
        .collect()
}

fn add_distance_gradient(pc: &PointCloud, (a, b): (u32, u32), scale: f64, grad: &mut [f64]) {
    let (a, b) = (a as usize, b as usize);
    let dist = pc.distance(a, b);
    if dist == 0.0 || scale == 0.0 {
        return;
    }
    let d = pc.dim();
    for k in 0..d {
        let unit = (pc.point(a)[k] - pc.point(b)[k]) / dist;
        grad[a * d + k] += scale * unit;
        grad[b * d + k] -= scale * unit;
    }
}

/// Gradient of `Σ weight(f) · lifetime(f)` with respect to the flattened
/// coordinates of `pc`, holding the weights fixed.
///
/// Each finite birth or death value is the length of its critical edge, so
/// it differentiates to the unit vector along that vertex pair. Infinite
/// features and features shorter than `eps_min` contribute nothing.
pub fn diagram_gradients(
    pd: &PersistenceDiagram,
    pc: &PointCloud,
    eps_min: f64,
    weight: impl Fn(&Feature) -> f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; pc.len() * pc.dim()];
    for (idx, f) in active_features(pd, eps_min) {
        let w = weight(f);
        let death = f.death_edge.ok_or(TopoError::MissingCriticalEdge(idx))?;
        add_distance_gradient(pc, death, w, &mut grad);
        if f.dim > 0 {
            let birth = f.birth_edge.ok_or(TopoError::MissingCriticalEdge(idx))?;
            add_distance_gradient(pc, birth, -w, &mut grad);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::compute_persistence;
    use crate::filtration::{rips_filtration, FiltrationKind};

    #[test]
    fn isolated_pair_has_unit_gradient() {
        let pc = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let pd = compute_persistence(&rips_filtration(&pc, 1, None).unwrap());
        let g = diagram_gradients(&pd, &pc, EPS_MIN, |_| 1.0).unwrap();
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn short_features_are_excluded() {
        let pc = PointCloud::from_rows(&[vec![0.0], vec![5e-5]]).unwrap();
        let pd = compute_persistence(&rips_filtration(&pc, 1, None).unwrap());
        assert_eq!(pd.max_lifetime(0), 5e-5);
        let g = diagram_gradients(&pd, &pc, 1e-4, |_| 1.0).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn untagged_diagram_is_rejected() {
        let pd = PersistenceDiagram::new(
            FiltrationKind::Witness,
            vec![Feature::new(0, 0.0, 1.0)],
        );
        let pc = PointCloud::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(
            diagram_gradients(&pd, &pc, EPS_MIN, |_| 1.0).unwrap_err(),
            TopoError::MissingCriticalEdge(0)
        );
    }
}
