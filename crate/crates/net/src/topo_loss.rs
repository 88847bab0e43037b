use overlap_autodiff::{Tape, Tensor, Var};
use overlap_topo::{
    active_features, compute_persistence_with, diagram_gradients, rips_filtration,
    rips_persistence, PersistenceDiagram, PointCloud, Reduction, EPS_MIN,
};
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Smallest batch the loss accepts.
pub const MIN_BATCH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoLossConfig {
    pub lambda: f64,
    pub eps_min: f64,
    /// 1 uses β₀ and β₁; 2 adds the β₂ reward.
    pub max_dim: usize,
}

impl Default for TopoLossConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eps_min: EPS_MIN,
            max_dim: 1,
        }
    }
}

impl TopoLossConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.eps_min >= 0.0) || !(1..=2).contains(&self.max_dim) {
            return Err(NetError::Parameter(format!("bad topological loss config {self:?}")));
        }
        Ok(())
    }

    fn weight(&self, dim: usize) -> f64 {
        if dim == 0 {
            1.0
        } else {
            -self.lambda
        }
    }
}

/// Loss node plus the diagram it was read from.
pub struct TopoLoss<'t> {
    pub loss: Var<'t>,
    pub diagram: PersistenceDiagram,
    /// `Σ l²` over active β₀ features.
    pub beta0_sq: f64,
    /// `Σ l²` over active features of dimension ≥ 1.
    pub higher_sq: f64,
}

pub fn cloud_from(z: &Tensor) -> Result<PointCloud> {
    if z.rank() != 2 {
        return Err(NetError::Dimension(format!("expected a [batch, D] matrix, got {:?}", z.shape())));
    }
    if z.rows() < MIN_BATCH {
        return Err(NetError::InsufficientPoints {
            need: MIN_BATCH,
            got: z.rows(),
        });
    }
    Ok(PointCloud::new(z.rows(), z.cols(), z.data().to_vec())?)
}

fn diagram(pc: &PointCloud, cfg: &TopoLossConfig) -> Result<PersistenceDiagram> {
    Ok(rips_persistence(pc, cfg.max_dim, None)?)
}

/// `Σ l(β₀)² − λ Σ l(β_k)²` over features at least `eps_min` long, with
/// `k` up to `max_dim`.
///
/// Every finite birth and death of a Rips diagram is the length of one
/// critical edge, so the loss is rebuilt on the tape from pairwise distances
/// of the rows of `z` and differentiates like any other node. The pairing
/// itself is treated as locally constant.
pub fn topo_loss<'t>(z: Var<'t>, cfg: &TopoLossConfig) -> Result<TopoLoss<'t>> {
    cfg.validate()?;
    let tape = z.tape();
    let pc = cloud_from(&z.value())?;
    let pd = diagram(&pc, cfg)?;

    let mut death0 = Vec::new();
    let mut death_hi = Vec::new();
    let mut birth_hi = Vec::new();
    for (idx, f) in active_features(&pd, cfg.eps_min) {
        let edge = |e: Option<(u32, u32)>| {
            e.map(|(a, b)| (a as usize, b as usize))
                .ok_or(NetError::Topo(overlap_topo::TopoError::MissingCriticalEdge(idx)))
        };
        if f.dim == 0 {
            death0.push(edge(f.death_edge)?);
        } else {
            death_hi.push(edge(f.death_edge)?);
            birth_hi.push(edge(f.birth_edge)?);
        }
    }

    let mut loss = tape.constant(Tensor::scalar(0.0));
    let mut beta0_sq = 0.0;
    let mut higher_sq = 0.0;
    if !death0.is_empty() {
        let s = tape.pair_distances(z, death0)?.square().sum();
        beta0_sq = s.item();
        loss = tape.add(loss, s)?;
    }
    if !death_hi.is_empty() {
        let l = tape.sub(tape.pair_distances(z, death_hi)?, tape.pair_distances(z, birth_hi)?)?;
        let s = l.square().sum();
        higher_sq = s.item();
        loss = tape.add_scaled(loss, s, -cfg.lambda)?;
    }
    Ok(TopoLoss {
        loss,
        diagram: pd,
        beta0_sq,
        higher_sq,
    })
}

/// Loss value straight from a diagram.
pub fn topo_loss_value(pd: &PersistenceDiagram, cfg: &TopoLossConfig) -> f64 {
    active_features(pd, cfg.eps_min)
        .into_iter()
        .filter(|(_, f)| f.dim <= cfg.max_dim)
        .map(|(_, f)| cfg.weight(f.dim) * f.lifetime().powi(2))
        .fold(0.0, |a, b| a + b)
}

/// Gradient of the loss with respect to the flattened points, computed on a
/// second route: the full Rips filtration reduced column by column, with the
/// chain rule applied by hand to the critical edges of that diagram.
pub fn reference_gradient(points: &Tensor, cfg: &TopoLossConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let pc = cloud_from(points)?;
    let pd = compute_persistence_with(&rips_filtration(&pc, cfg.max_dim, None)?, Reduction::Standard);
    Ok(diagram_gradients(&pd, &pc, cfg.eps_min, |f| {
        2.0 * cfg.weight(f.dim) * f.lifetime()
    })?)
}

/// Gradient of the loss through the tape.
pub fn tape_gradient(points: &Tensor, cfg: &TopoLossConfig) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let z = tape.param(points.clone());
    let tl = topo_loss(z, cfg)?;
    Ok(tape.backward(tl.loss)?.wrt_or_zeros(z))
}

/// `1 − cos` between the tape gradient and [`reference_gradient`]. Zero
/// when both vanish.
pub fn dual_gradient_distance(points: &Tensor, cfg: &TopoLossConfig) -> Result<f64> {
    let a = tape_gradient(points, cfg)?;
    let b = reference_gradient(points, cfg)?;
    let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        return Ok(0.0);
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - dot / (na * nb))
}

/// `L_task + α·L_topo`. With `α = 0` the topological term is never built.
pub fn total_loss<'t>(
    task: Var<'t>,
    alpha: f64,
    topo: impl FnOnce() -> Result<Var<'t>>,
) -> Result<Var<'t>> {
    if !(alpha >= 0.0) {
        return Err(NetError::Parameter(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(task);
    }
    let t = topo()?;
    Ok(task.tape().add_scaled(task, t, alpha)?)
}

/// Ratio of finite β₁ to finite β₀ total persistence,
/// `Σ l(β₁) / (Σ l(β₀) + 1e-8)`.
pub fn structural_tension(pd: &PersistenceDiagram) -> f64 {
    pd.total_persistence(1) / (pd.total_persistence(0) + 1e-8)
}

/// τ of a `[batch, D]` representation under Rips persistence.
pub fn tension_of(points: &Tensor) -> Result<(f64, PersistenceDiagram)> {
    let pd = rips_persistence(&cloud_from(points)?, 1, None)?;
    Ok((structural_tension(&pd), pd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Tensor {
        Tensor::matrix(4, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn unit_square_values() {
        let (tau, _) = tension_of(&square()).unwrap();
        assert!((tau - (2f64.sqrt() - 1.0) / (3.0 + 1e-8)).abs() < 1e-12);
        let tape = Tape::new();
        let tl = topo_loss(tape.constant(square()), &TopoLossConfig::default()).unwrap();
        let want = 3.0 - (2f64.sqrt() - 1.0).powi(2);
        assert!((tl.loss.item() - want).abs() < 1e-12);
        assert!((topo_loss_value(&tl.diagram, &TopoLossConfig::default()) - want).abs() < 1e-12);
    }

    #[test]
    fn small_batches_rejected() {
        let tape = Tape::new();
        let z = tape.constant(Tensor::matrix(3, 2, vec![0.0; 6]).unwrap());
        assert!(matches!(
            topo_loss(z, &TopoLossConfig::default()),
            Err(NetError::InsufficientPoints { need: 4, got: 3 })
        ));
    }

    #[test]
    fn total_loss_arithmetic() {
        let tape = Tape::new();
        let task = tape.constant(Tensor::scalar(1.0));
        let t = total_loss(task, 0.1, || Ok(tape.constant(Tensor::scalar(2.0)))).unwrap();
        assert!((t.item() - 1.2).abs() < 1e-15);
        let t0 = total_loss(task, 0.0, || panic!("must not be built")).unwrap();
        assert_eq!(t0.item(), 1.0);
        assert!(total_loss(task, -1.0, || Ok(task)).is_err());
    }
}
