use overlap_net::{AlphaSchedule, DecayMode};
use overlap_stats::pearson;
use overlap_synth::{ood_variant, SyntheticDataset};
use serde::{Deserialize, Serialize};

use crate::config::{Condition, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::train::{Evaluation, Split, TaskData, TrainedModel, Trainer};

pub const STRESS_EPOCHS: usize = 50;
pub const OOD_SHIFTS: [f64; 4] = [0.0, 1.0, 2.0, 5.0];
pub const OVER_ENTANGLE_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressMode {
    AlphaDecay,
    Ood,
    OverEntangle,
}

impl StressMode {
    pub const ALL: [StressMode; 3] = [StressMode::AlphaDecay, StressMode::Ood, StressMode::OverEntangle];

    pub fn name(self) -> &'static str {
        match self {
            StressMode::AlphaDecay => "alpha_decay",
            StressMode::Ood => "ood",
            StressMode::OverEntangle => "over_entangle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressOptions {
    /// Epochs for the α decay and for the over-entangled retraining.
    pub epochs: usize,
    pub shifts: Vec<f64>,
}

impl Default for StressOptions {
    fn default() -> Self {
        Self {
            epochs: STRESS_EPOCHS,
            shifts: OOD_SHIFTS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressCheckpoint {
    /// Epoch index, or the shift for the OOD mode.
    pub at: f64,
    pub ns: f64,
    pub beta1: f64,
    pub tau: f64,
    /// Held-out task accuracy.
    pub quality: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub mode: StressMode,
    pub checkpoints: Vec<StressCheckpoint>,
    pub ns: Vec<f64>,
    pub beta1: Vec<f64>,
    pub quality: Vec<f64>,
    pub ns_initial: f64,
    pub ns_final: f64,
    pub ns_reduced: bool,
    /// β₁ total persistence ended below half its initial value.
    pub collapse: bool,
    /// Pearson r between NS loss and quality loss over checkpoints.
    pub ns_quality_correlation: Option<f64>,
    /// Pearson r between β₁ loss and quality loss over checkpoints.
    pub beta1_quality_correlation: Option<f64>,
    pub aborted: Option<String>,
}

fn checkpoint(at: f64, e: &Evaluation) -> StressCheckpoint {
    StressCheckpoint {
        at,
        ns: e.ns_mean,
        beta1: e.beta1,
        tau: e.tau,
        quality: e.accuracy,
    }
}

fn degradation(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| v[0] - x).collect()
}

fn report(mode: StressMode, checkpoints: Vec<StressCheckpoint>, aborted: Option<String>) -> StressReport {
    let ns: Vec<f64> = checkpoints.iter().map(|c| c.ns).collect();
    let beta1: Vec<f64> = checkpoints.iter().map(|c| c.beta1).collect();
    let quality: Vec<f64> = checkpoints.iter().map(|c| c.quality).collect();
    let dq = degradation(&quality);
    let ns_initial = ns.first().copied().unwrap_or(f64::NAN);
    let ns_final = ns.last().copied().unwrap_or(f64::NAN);
    let b_initial = beta1.first().copied().unwrap_or(0.0);
    let b_final = beta1.last().copied().unwrap_or(0.0);
    StressReport {
        mode,
        ns_quality_correlation: pearson(&degradation(&ns), &dq).ok(),
        beta1_quality_correlation: pearson(&degradation(&beta1), &dq).ok(),
        ns_initial,
        ns_final,
        ns_reduced: ns_final < ns_initial,
        collapse: b_initial > 0.0 && b_final < 0.5 * b_initial,
        checkpoints,
        ns,
        beta1,
        quality,
        aborted,
    }
}

/// Trains for `epochs` with `schedule`, evaluating after every epoch.
/// Checkpoint 0 is the starting model.
fn train_with_checkpoints(
    trainer: &mut Trainer,
    data: &TaskData,
    schedule: AlphaSchedule,
    epochs: usize,
) -> Result<(Vec<StressCheckpoint>, Option<String>)> {
    let cfg = trainer.cfg.clone();
    let mut cps = vec![checkpoint(0.0, &trainer.model.evaluate(&data.val, &cfg, trainer.seed)?)];
    let mut tracker = schedule.tracker()?;
    let mut previous_ns = None;
    for epoch in 0..epochs {
        let alpha = tracker.at_epoch(epoch, previous_ns);
        match trainer.epoch(data, epoch, alpha) {
            Ok(ns) => previous_ns = Some(ns),
            Err(HarnessError::Degenerate(msg)) => return Ok((cps, Some(msg))),
            Err(e) => return Err(e),
        }
        cps.push(checkpoint((epoch + 1) as f64, &trainer.model.evaluate(&data.val, &cfg, trainer.seed)?));
    }
    Ok((cps, None))
}

/// Runs one stress protocol against a trained uoo model.
///
/// `alpha_decay` continues training with α falling linearly to zero,
/// `ood` evaluates the frozen model on shifted copies of the held-out rows,
/// and `over_entangle` retrains from the same seed with λ multiplied by
/// [`OVER_ENTANGLE_FACTOR`] and no NS guard. `ds` is the dataset the model
/// was trained on; its held-out rows serve as the quality split.
pub fn stress_test(
    cfg: &ExperimentConfig,
    seed: u64,
    model: &TrainedModel,
    ds: &SyntheticDataset,
    mode: StressMode,
    opts: &StressOptions,
) -> Result<StressReport> {
    if !matches!(model, TrainedModel::Ode(_)) {
        return Err(HarnessError::Config("stress protocols need a trained uoo model".into()));
    }
    let cfg = cfg.with_condition(Condition::Uoo);
    cfg.validate()?;
    let data = TaskData::from_dataset(ds, cfg.val_fraction)?;
    match mode {
        StressMode::AlphaDecay => {
            let schedule = AlphaSchedule {
                alpha0: cfg.alpha.alpha0,
                floor: 0.0,
                decay: DecayMode::Linear { epochs: opts.epochs },
                guard: None,
            };
            let mut trainer = Trainer::resume(&cfg, seed, model.clone());
            let (cps, aborted) = train_with_checkpoints(&mut trainer, &data, schedule, opts.epochs)?;
            Ok(report(mode, cps, aborted))
        }
        StressMode::Ood => {
            let (_, val_idx) = ds.split(1.0 - cfg.val_fraction);
            let val = ds.subset(&val_idx);
            let cps = opts
                .shifts
                .iter()
                .map(|&shift| {
                    let split = Split::from_dataset(&ood_variant(&val, shift)?)?;
                    Ok(checkpoint(shift, &model.evaluate(&split, &cfg, seed)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(report(mode, cps, None))
        }
        StressMode::OverEntangle => {
            let over = ExperimentConfig {
                lambda: cfg.lambda * OVER_ENTANGLE_FACTOR,
                alpha: AlphaSchedule {
                    guard: None,
                    decay: DecayMode::Constant,
                    ..cfg.alpha
                },
                ..cfg.clone()
            };
            let mut trainer = Trainer::new(&over, seed)?;
            let schedule = over.alpha;
            let (cps, aborted) = train_with_checkpoints(&mut trainer, &data, schedule, opts.epochs)?;
            Ok(report(mode, cps, aborted))
        }
    }
}
