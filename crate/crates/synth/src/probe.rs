use overlap_autodiff::{Adam, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{SyntheticDataset, DIM};
use crate::error::{Result, SynthError};

/// Share of rows used to fit probes; the rest is held out for accuracy.
pub const PROBE_TRAIN_FRACTION: f64 = 0.5;
pub const MLP_PROBE_HIDDEN: usize = 32;
pub const BILINEAR_PROBE_RANK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeKind {
    /// Logistic regression on one modality.
    Linear,
    /// One SiLU hidden layer on one modality.
    Mlp { hidden: usize },
    /// `Σ_r (x·u_r)(y·v_r) + b` over both modalities.
    Bilinear { rank: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    X,
    Y,
}

/// Fitted probe parameters.
#[derive(Clone, Debug)]
pub struct Probe {
    pub kind: ProbeKind,
    params: Vec<Tensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeilingReport {
    pub x_only: f64,
    pub y_only: f64,
    /// Held-out accuracy of the summed logits `f(x) + g(y)`.
    pub additive: f64,
    pub majority: f64,
    /// Held-out accuracy of whichever of the three additive candidates fits
    /// the training rows best.
    pub ceiling: f64,
}

fn gaussian(rng: &mut ChaCha8Rng, shape: &[usize], sd: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

fn rows(block: &[f64], idx: &[usize]) -> Tensor {
    let data = idx
        .iter()
        .flat_map(|&i| block[i * DIM..(i + 1) * DIM].iter().copied())
        .collect();
    Tensor::matrix(idx.len(), DIM, data).expect("row block")
}

fn init(kind: ProbeKind, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let scale = 1.0 / (DIM as f64).sqrt();
    match kind {
        ProbeKind::Linear => vec![Tensor::zeros(&[DIM, 1]), Tensor::zeros(&[1])],
        ProbeKind::Mlp { hidden } => vec![
            gaussian(rng, &[DIM, hidden], scale),
            Tensor::zeros(&[hidden]),
            gaussian(rng, &[hidden, 1], 1.0 / (hidden as f64).sqrt()),
            Tensor::zeros(&[1]),
        ],
        ProbeKind::Bilinear { rank } => vec![
            gaussian(rng, &[DIM, rank], scale),
            gaussian(rng, &[DIM, rank], scale),
            Tensor::zeros(&[1]),
        ],
    }
}

fn forward<'t>(
    tape: &'t Tape,
    kind: ProbeKind,
    p: &[Var<'t>],
    x: Var<'t>,
    y: Option<Var<'t>>,
) -> Result<Var<'t>> {
    Ok(match kind {
        ProbeKind::Linear => tape.affine(x, p[0], p[1])?,
        ProbeKind::Mlp { .. } => {
            let h = tape.affine(x, p[0], p[1])?.silu();
            tape.affine(h, p[2], p[3])?
        }
        ProbeKind::Bilinear { rank } => {
            let y = y.ok_or_else(|| SynthError::Parameter("bilinear probe needs y".into()))?;
            let prod = tape.mul(tape.matmul(x, p[0])?, tape.matmul(y, p[1])?)?;
            let ones = tape.constant(Tensor::new(vec![rank, 1], vec![1.0; rank])?);
            tape.affine(prod, ones, p[2])?
        }
    })
}

impl Probe {
    /// Full-batch Adam on mean binary cross-entropy.
    pub fn fit(
        kind: ProbeKind,
        x: &Tensor,
        y: Option<&Tensor>,
        targets: &[f64],
        seed: u64,
        steps: usize,
        lr: f64,
    ) -> Result<Probe> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = init(kind, &mut rng);
        let mut opt = Adam::new(lr).with_weight_decay(1e-4);
        for _ in 0..steps {
            let tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
            let xv = tape.constant(x.clone());
            let yv = y.map(|t| tape.constant(t.clone()));
            let logits = forward(&tape, kind, &vars, xv, yv)?;
            let loss = tape.bce_with_logits(logits, targets.to_vec())?;
            let grads = tape.backward(loss)?;
            let g: Vec<Vec<f64>> = vars.iter().map(|v| grads.wrt_or_zeros(*v)).collect();
            drop(vars);
            let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
            opt.update(&mut refs, &g)?;
        }
        Ok(Probe { kind, params })
    }

    pub fn logits(&self, x: &Tensor, y: Option<&Tensor>) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let xv = tape.constant(x.clone());
        let yv = y.map(|t| tape.constant(t.clone()));
        let out = forward(&tape, self.kind, &vars, xv, yv)?;
        let data = out.value().data().to_vec();
        Ok(data)
    }
}

/// Fraction of logits on the correct side of zero.
pub fn accuracy(logits: &[f64], targets: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let hits = logits
        .iter()
        .zip(targets)
        .filter(|(&l, &t)| (l > 0.0) == (t > 0.5))
        .count();
    hits as f64 / targets.len() as f64
}

fn pick(idx: &[usize], v: &[f64]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn probe_seed(ds: &SyntheticDataset, salt: u64) -> u64 {
    ds.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt
}

/// Held-out accuracy of a logistic probe on one modality.
pub fn linear_probe_accuracy(ds: &SyntheticDataset, modality: Modality) -> Result<f64> {
    let (tr, te) = ds.split(PROBE_TRAIN_FRACTION);
    let t = ds.targets();
    let block = match modality {
        Modality::X => &ds.x,
        Modality::Y => &ds.y,
    };
    let probe = Probe::fit(ProbeKind::Linear, &rows(block, &tr), None, &pick(&tr, &t), probe_seed(ds, 1), 300, 0.05)?;
    Ok(accuracy(&probe.logits(&rows(block, &te), None)?, &pick(&te, &t)))
}

/// Held-out accuracy of a low-rank bilinear probe on both modalities.
pub fn joint_probe_accuracy(ds: &SyntheticDataset) -> Result<f64> {
    let (tr, te) = ds.split(PROBE_TRAIN_FRACTION);
    let t = ds.targets();
    let kind = ProbeKind::Bilinear { rank: BILINEAR_PROBE_RANK };
    let probe = Probe::fit(
        kind,
        &rows(&ds.x, &tr),
        Some(&rows(&ds.y, &tr)),
        &pick(&tr, &t),
        probe_seed(ds, 2),
        400,
        0.02,
    )?;
    let logits = probe.logits(&rows(&ds.x, &te), Some(&rows(&ds.y, &te)))?;
    Ok(accuracy(&logits, &pick(&te, &t)))
}

/// Trains `f(x)` and `g(y)` as independent MLP probes and reports held-out
/// accuracies of `f`, `g` and `f + g`.
pub fn ceiling_report(ds: &SyntheticDataset) -> Result<CeilingReport> {
    if ds.len() < 200 {
        return Err(SynthError::Parameter(format!(
            "separable ceiling needs at least 200 samples, got {}",
            ds.len()
        )));
    }
    let (tr, te) = ds.split(PROBE_TRAIN_FRACTION);
    let t = ds.targets();
    let (t_tr, t_te) = (pick(&tr, &t), pick(&te, &t));
    let kind = ProbeKind::Mlp { hidden: MLP_PROBE_HIDDEN };
    let f = Probe::fit(kind, &rows(&ds.x, &tr), None, &t_tr, probe_seed(ds, 3), 300, 0.01)?;
    let g = Probe::fit(kind, &rows(&ds.y, &tr), None, &t_tr, probe_seed(ds, 4), 300, 0.01)?;

    let eval = |idx: &[usize]| -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((f.logits(&rows(&ds.x, idx), None)?, g.logits(&rows(&ds.y, idx), None)?))
    };
    let sum = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + q).collect() };
    let (fx_tr, gy_tr) = eval(&tr)?;
    let (fx_te, gy_te) = eval(&te)?;
    let train_acc = [
        accuracy(&fx_tr, &t_tr),
        accuracy(&gy_tr, &t_tr),
        accuracy(&sum(&fx_tr, &gy_tr), &t_tr),
    ];
    let test_acc = [
        accuracy(&fx_te, &t_te),
        accuracy(&gy_te, &t_te),
        accuracy(&sum(&fx_te, &gy_te), &t_te),
    ];
    let best = (0..3)
        .max_by(|&a, &b| train_acc[a].total_cmp(&train_acc[b]).then(b.cmp(&a)))
        .expect("three candidates");
    let ones = t_te.iter().filter(|&&v| v > 0.5).count() as f64;
    let majority = (ones.max(t_te.len() as f64 - ones)) / t_te.len().max(1) as f64;
    Ok(CeilingReport {
        x_only: test_acc[0],
        y_only: test_acc[1],
        additive: test_acc[2],
        majority,
        ceiling: test_acc[best],
    })
}

/// Held-out accuracy ceiling of models of the form `f(x) + g(y)`.
pub fn separable_ceiling(ds: &SyntheticDataset) -> Result<f64> {
    Ok(ceiling_report(ds)?.ceiling)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts_sides() {
        assert_eq!(accuracy(&[1.0, -1.0, 2.0, -0.5], &[1.0, 0.0, 0.0, 0.0]), 0.75);
    }

    #[test]
    fn linear_probe_learns_separable_targets() {
        let x = Tensor::matrix(
            4,
            DIM,
            (0..4 * DIM)
                .map(|i| if i % DIM == 0 { [1.0, -1.0, 2.0, -2.0][i / DIM] } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let t = [1.0, 0.0, 1.0, 0.0];
        let p = Probe::fit(ProbeKind::Linear, &x, None, &t, 0, 200, 0.1).unwrap();
        assert_eq!(accuracy(&p.logits(&x, None).unwrap(), &t), 1.0);
    }

    #[test]
    fn ceiling_needs_enough_rows() {
        let ds = crate::generate("xor64", 100, 1, 0.0).unwrap();
        assert!(separable_ceiling(&ds).is_err());
    }
}
