use crate::cloud::PointCloud;
use crate::error::{Result, TopoError};
use crate::filtration::{flag_complex, Filtration, FiltrationKind, MAX_POINTS_DIM1};

/// Max-min landmark selection starting from point 0: each further landmark
/// is the point farthest from those already chosen (ties to the lower index).
pub fn maxmin_landmarks(pc: &PointCloud, m: usize) -> Result<Vec<usize>> {
    let n = pc.len();
    if m == 0 || m > n {
        return Err(TopoError::Parameter(format!(
            "landmark count must be in 1..={n}, got {m}"
        )));
    }
    let mut chosen = vec![0usize];
    let mut nearest: Vec<f64> = (0..n).map(|i| pc.distance(0, i)).collect();
    while chosen.len() < m {
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        chosen.push(best);
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(pc.distance(best, i));
        }
    }
    Ok(chosen)
}

/// Lazy weak witness filtration on `m` max-min landmarks, homology up to
/// dimension 1.
///
/// A witness `w` covers a landmark simplex at radius `r` when every vertex
/// lies within `r` of `w`; the simplex enters at the smallest such `r` over
/// the non-landmark witnesses, reported as the diameter `2r` so values sit on
/// the same scale as Rips. Higher simplices enter once all their edges have
/// (flag closure). If every point is a landmark, all points act as witnesses.
///
/// Vertex `i` of the result is landmark `maxmin_landmarks(pc, m)[i]`.
pub fn witness_filtration(pc: &PointCloud, m: usize) -> Result<Filtration> {
    if m < 2 || m > pc.len() {
        return Err(TopoError::Parameter(format!(
            "witness filtration needs 2 <= m <= n, got m={m}, n={}",
            pc.len()
        )));
    }
    if m > MAX_POINTS_DIM1 {
        return Err(TopoError::Capacity(format!(
            "{m} landmarks exceed the limit of {MAX_POINTS_DIM1}"
        )));
    }
    let landmarks = maxmin_landmarks(pc, m)?;
    let mut is_landmark = vec![false; pc.len()];
    for &l in &landmarks {
        is_landmark[l] = true;
    }
    let mut witnesses: Vec<usize> = (0..pc.len()).filter(|&i| !is_landmark[i]).collect();
    if witnesses.is_empty() {
        witnesses = (0..pc.len()).collect();
    }

    // to_landmark[w][a]: distance from witness w to landmark a
    let to_landmark: Vec<Vec<f64>> = witnesses
        .iter()
        .map(|&w| landmarks.iter().map(|&l| pc.distance(w, l)).collect())
        .collect();

    let vertex: Vec<f64> = (0..m)
        .map(|a| 2.0 * to_landmark.iter().map(|d| d[a]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut edges = vec![0.0; m * m];
    for a in 0..m {
        for b in a + 1..m {
            let r = to_landmark
                .iter()
                .map(|d| d[a].max(d[b]))
                .fold(f64::INFINITY, f64::min);
            edges[a * m + b] = 2.0 * r;
            edges[b * m + a] = 2.0 * r;
        }
    }
    flag_complex(FiltrationKind::Witness, &vertex, &edges, f64::INFINITY, 1)
}
