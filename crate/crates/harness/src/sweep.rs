use overlap_autodiff::Tensor;
use overlap_net::{tension_of, AlphaSchedule};
use overlap_stats::{threshold_report, upper_threshold, ThresholdReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Condition, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::poc::MeanSd;
use crate::train::{ns_projection, run_condition, RunOutcome, TaskData};

pub const MIN_SWEEP_POINTS: usize = 3;
pub const RECOMMENDED_ALPHAS: usize = 5;
pub const HISTOGRAM_BINS: usize = 20;
/// Rows per group when pairing mean NS with τ for the changepoint search.
pub const TAU_GROUP: usize = 16;

/// Density histogram on `[lo, hi]`: `Σ density·width = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = values.len().max(1) as f64;
        Self {
            edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
            density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    PhaseTransition,
    TuningParameter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub runs_ok: usize,
    pub runs_aborted: usize,
    /// Final NS of every validation representation, pooled over seeds.
    pub ns: Vec<f64>,
    pub ns_histogram: Histogram,
    pub tau: MeanSd,
    /// Validation accuracy.
    pub quality: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
    pub thresholds: Option<ThresholdReport>,
    pub signature: Signature,
    /// The κ** changepoint, standing in for the constant C.
    pub c_proxy: Option<f64>,
    /// `(mean NS, τ)` of each group of [`TAU_GROUP`] rows, in run order.
    pub ns_tau_pairs: Vec<(f64, f64)>,
    pub tau_group: usize,
    pub warnings: Vec<String>,
}

pub struct SweepOutcome {
    pub report: SweepReport,
    pub runs: Vec<(f64, RunOutcome)>,
}

/// Warnings for α grids smaller or narrower than the detection protocol
/// asks for.
pub fn alpha_grid_warnings(alphas: &[f64]) -> Vec<String> {
    let mut w = Vec::new();
    if alphas.len() < RECOMMENDED_ALPHAS {
        w.push(format!("{} alpha values; at least {RECOMMENDED_ALPHAS} are recommended", alphas.len()));
    }
    let pos: Vec<f64> = alphas.iter().copied().filter(|&a| a > 0.0).collect();
    let span = match (
        pos.iter().copied().reduce(f64::min),
        pos.iter().copied().reduce(f64::max),
    ) {
        (Some(lo), Some(hi)) => hi / lo,
        _ => 1.0,
    };
    if span < 100.0 {
        w.push("positive alpha values span less than two orders of magnitude".into());
    }
    w
}

/// Trains the uoo condition once per `(α, seed)` with a constant α and
/// runs threshold detection on the pooled final NS values.
pub fn alpha_sweep(cfg: &ExperimentConfig, alphas: &[f64], seeds: &[u64]) -> Result<SweepOutcome> {
    if alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(HarnessError::Config("alpha values must be finite and non-negative".into()));
    }
    let base = ExperimentConfig {
        condition: Condition::Uoo,
        ..cfg.clone()
    };
    base.validate()?;
    let data: Vec<TaskData> = seeds
        .par_iter()
        .map(|&s| TaskData::generate(&base, &base.family, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..seeds.len()).map(move |s| (a, s)))
        .collect();
    let runs: Vec<(f64, RunOutcome)> = jobs
        .par_iter()
        .map(|&(a, s)| -> Result<_> {
            let run_cfg = ExperimentConfig {
                alpha: AlphaSchedule::constant(alphas[a]),
                ..base.clone()
            };
            Ok((alphas[a], run_condition(&run_cfg, seeds[s], &data[s])?))
        })
        .collect::<Result<_>>()?;

    let (lo, hi) = (0.0, (cfg.ns_shape.0.min(cfg.ns_shape.1) as f64).ln());
    let mut points = Vec::new();
    let mut pooled = Vec::new();
    let mut pairs = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mine: Vec<&RunOutcome> = runs[ai * seeds.len()..(ai + 1) * seeds.len()]
            .iter()
            .map(|(_, o)| o)
            .collect();
        let mut ns = Vec::new();
        let mut taus = Vec::new();
        let mut quality = Vec::new();
        let mut ok = 0;
        for (si, o) in mine.iter().enumerate() {
            let Some(e) = o.final_eval.as_ref() else { continue };
            ok += 1;
            ns.extend(&e.ns);
            taus.push(e.tau);
            quality.push(e.accuracy);
            let (reps, _) = o.model.represent(&data[si].val, &base)?;
            let proj = ns_projection(&base, o.model.representation_dim(), o.seed);
            let idx: Vec<usize> = (0..reps.rows()).collect();
            for g in idx.chunks(TAU_GROUP).filter(|g| g.len() == TAU_GROUP) {
                let rows: Vec<f64> = g.iter().flat_map(|&r| reps.row(r).iter().copied()).collect();
                let group = Tensor::matrix(g.len(), reps.cols(), rows)?;
                let (tau, _) = tension_of(&group)?;
                let ns_mean = proj.entropies(&group)?.iter().sum::<f64>() / g.len() as f64;
                pairs.push((ns_mean, tau));
            }
        }
        pooled.extend(&ns);
        points.push(SweepPoint {
            alpha,
            runs_ok: ok,
            runs_aborted: mine.len() - ok,
            ns_histogram: Histogram::new(&ns, lo, hi, HISTOGRAM_BINS),
            ns,
            tau: MeanSd::of(taus),
            quality: MeanSd::of(quality),
        });
    }
    let good = points.iter().filter(|p| p.runs_ok > 0).count();
    if good < MIN_SWEEP_POINTS {
        return Err(HarnessError::SweepInsufficient {
            need: MIN_SWEEP_POINTS,
            got: good,
        });
    }
    let seed = seeds.first().copied().unwrap_or(0);
    let mut thresholds = threshold_report(&pooled, None, seed)?;
    if pairs.len() >= 4 {
        let ns: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let tau: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (kss, cps) = upper_threshold(&ns, &tau)?;
        thresholds.kappa_star_star = kss;
        thresholds.changepoints = cps;
    }
    let signature = if thresholds.kappa_star.is_some() {
        Signature::PhaseTransition
    } else {
        Signature::TuningParameter
    };
    let report = SweepReport {
        config_hash: base.hash(),
        alphas: alphas.to_vec(),
        seeds: seeds.to_vec(),
        points,
        c_proxy: thresholds.kappa_star_star,
        thresholds: Some(thresholds),
        signature,
        ns_tau_pairs: pairs,
        tau_group: TAU_GROUP,
        warnings: alpha_grid_warnings(alphas),
    };
    Ok(SweepOutcome { report, runs })
}
