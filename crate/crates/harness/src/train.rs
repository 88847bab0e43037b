use overlap_autodiff::{Adam, Tape, Tensor, Var};
use overlap_net::{
    tension_of, topo_loss, total_loss, uniform_grid, AlphaSchedule, ContrastiveParams,
    GradientHealthLog, ModelParams, NsProjection, REMEDIATION_HINT,
};
use overlap_synth::{accuracy, generate, SyntheticDataset, DIM};
use overlap_topo::PersistenceDiagram;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Condition, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{MetricsLog, MetricsRow};

/// Loss above which a run is treated as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;
/// Rows per forward pass during evaluation.
const EVAL_CHUNK: usize = 128;

/// Paired inputs and binary targets as dense row-major matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub x: Tensor,
    pub y: Tensor,
    pub targets: Vec<f64>,
}

fn take_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let c = t.cols();
    let data = idx.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
    Tensor::matrix(idx.len(), c, data).expect("row gather keeps the shape")
}

impl Split {
    pub fn from_dataset(ds: &SyntheticDataset) -> Result<Self> {
        Ok(Self {
            x: Tensor::matrix(ds.len(), DIM, ds.x.clone())?,
            y: Tensor::matrix(ds.len(), DIM, ds.y.clone())?,
            targets: ds.targets(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn rows(&self, idx: &[usize]) -> Split {
        Split {
            x: take_rows(&self.x, idx),
            y: take_rows(&self.y, idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    pub fn head(&self, k: usize) -> Split {
        self.rows(&(0..k.min(self.len())).collect::<Vec<_>>())
    }
}

/// Training and validation rows of one dataset.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: Split,
    pub val: Split,
}

impl TaskData {
    /// The leading `1 − val_fraction` share of rows trains, the rest
    /// validates.
    pub fn from_dataset(ds: &SyntheticDataset, val_fraction: f64) -> Result<Self> {
        let (train, val) = ds.split(1.0 - val_fraction);
        let all = Split::from_dataset(ds)?;
        Ok(Self {
            train: all.rows(&train),
            val: all.rows(&val),
        })
    }

    pub fn generate(cfg: &ExperimentConfig, family: &str, seed: u64) -> Result<Self> {
        Self::from_dataset(&generate(family, cfg.n, seed, cfg.entanglement)?, cfg.val_fraction)
    }
}

/// Trained parameters of either architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Ode(ModelParams),
    Contrastive(ContrastiveParams),
}

/// Representation-level metrics of a model on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// NS of every row's representation.
    pub ns: Vec<f64>,
    pub ns_mean: f64,
    /// τ of the first `eval_batch` representations.
    pub tau: f64,
    pub beta1: f64,
    pub diagram: PersistenceDiagram,
}

impl TrainedModel {
    pub fn param_count(&self) -> usize {
        match self {
            TrainedModel::Ode(p) => p.param_count(),
            TrainedModel::Contrastive(p) => p.param_count(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            TrainedModel::Ode(p) => p.is_finite(),
            TrainedModel::Contrastive(p) => p.is_finite(),
        }
    }

    pub fn representation_dim(&self) -> usize {
        match self {
            TrainedModel::Ode(p) => p.config.latent,
            TrainedModel::Contrastive(p) => 2 * p.config.embed,
        }
    }

    pub fn tensors(&self) -> &[Tensor] {
        match self {
            TrainedModel::Ode(p) => p.tensors(),
            TrainedModel::Contrastive(p) => p.tensors(),
        }
    }

    /// Final representations and logits, computed in chunks.
    pub fn represent(&self, split: &Split, cfg: &ExperimentConfig) -> Result<(Tensor, Vec<f64>)> {
        let grid = uniform_grid(1.0, cfg.grid_points);
        let mut reps = Vec::with_capacity(split.len() * self.representation_dim());
        let mut logits = Vec::with_capacity(split.len());
        let idx: Vec<usize> = (0..split.len()).collect();
        for chunk in idx.chunks(EVAL_CHUNK) {
            let part = split.rows(chunk);
            let (r, l) = match self {
                TrainedModel::Ode(p) => {
                    let e = p.embed(&part.x, &part.y, &grid, cfg.solver)?;
                    (e.zt, e.logits)
                }
                TrainedModel::Contrastive(p) => p.embed(&part.x, &part.y)?,
            };
            reps.extend_from_slice(r.data());
            logits.extend(l);
        }
        Ok((Tensor::matrix(split.len(), self.representation_dim(), reps)?, logits))
    }

    /// ODE states at every grid time for the first `rows` rows. Empty for
    /// the contrastive baseline, which has no trajectory.
    pub fn trajectory(&self, split: &Split, rows: usize, cfg: &ExperimentConfig) -> Result<Vec<Tensor>> {
        match self {
            TrainedModel::Ode(p) => {
                let part = split.head(rows);
                Ok(p.embed(&part.x, &part.y, &uniform_grid(1.0, cfg.grid_points), cfg.solver)?
                    .trajectory)
            }
            TrainedModel::Contrastive(_) => Ok(Vec::new()),
        }
    }

    pub fn evaluate(&self, split: &Split, cfg: &ExperimentConfig, seed: u64) -> Result<Evaluation> {
        let (reps, logits) = self.represent(split, cfg)?;
        let proj = ns_projection(cfg, self.representation_dim(), seed);
        let ns = proj.entropies(&reps)?;
        let k = cfg.eval_batch.min(split.len());
        let (tau, diagram) = tension_of(&take_rows(&reps, &(0..k).collect::<Vec<_>>()))?;
        Ok(Evaluation {
            accuracy: accuracy(&logits, &split.targets),
            ns_mean: ns.iter().sum::<f64>() / ns.len() as f64,
            ns,
            tau,
            beta1: diagram.total_persistence(1),
            diagram,
        })
    }

    pub fn accuracy(&self, split: &Split, cfg: &ExperimentConfig) -> Result<f64> {
        let (_, logits) = self.represent(split, cfg)?;
        Ok(accuracy(&logits, &split.targets))
    }
}

/// NS projection for representations of size `dim`; the identity when the
/// configured reshape already has `dim` entries.
pub fn ns_projection(cfg: &ExperimentConfig, dim: usize, seed: u64) -> NsProjection {
    NsProjection::new(dim, cfg.ns_shape.0, cfg.ns_shape.1, seed ^ 0x6e73_7072_6f6a)
}

/// Metrics of one optimiser step.
#[derive(Clone, Debug)]
pub struct StepStats {
    pub task_loss: f64,
    pub topo_loss: Option<f64>,
    pub total_loss: f64,
    pub grad_norm: Option<f64>,
    /// Batch representation before the update.
    pub representation: Tensor,
}

/// Mutable state of a training run; epochs can be resumed by later
/// protocols with a different α schedule.
pub struct Trainer {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub model: TrainedModel,
    pub log: MetricsLog,
    pub health: GradientHealthLog,
    /// Batch representations behind each logged row.
    pub snapshots: Vec<Tensor>,
    pub steps: usize,
    optimizer: Adam,
    rng: ChaCha8Rng,
    projection: NsProjection,
    grid: Vec<f64>,
    remediation_logged: bool,
}

fn gradients(tape: &Tape, loss: Var<'_>, vars: &[Var<'_>]) -> Result<Vec<Vec<f64>>> {
    let g = tape.backward(loss)?;
    Ok(vars.iter().map(|&v| g.wrt_or_zeros(v)).collect())
}

impl Trainer {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let model = match cfg.condition {
            Condition::Contrastive => {
                TrainedModel::Contrastive(ContrastiveParams::init(cfg.contrastive_config(), seed)?)
            }
            _ => TrainedModel::Ode(ModelParams::init(cfg.model_config(), seed)?),
        };
        Ok(Self::resume(cfg, seed, model))
    }

    /// Continues from existing parameters with a fresh optimiser.
    pub fn resume(cfg: &ExperimentConfig, seed: u64, model: TrainedModel) -> Self {
        let projection = ns_projection(cfg, model.representation_dim(), seed);
        Self {
            cfg: cfg.clone(),
            seed,
            model,
            log: MetricsLog::new(),
            health: GradientHealthLog::new(),
            snapshots: Vec::new(),
            steps: 0,
            optimizer: Adam::new(cfg.lr),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x7368_7566),
            projection,
            grid: uniform_grid(1.0, cfg.grid_points),
            remediation_logged: false,
        }
    }

    /// One optimiser step on `batch` with topological weight `alpha`.
    pub fn step(&mut self, batch: &Split, alpha: f64) -> Result<StepStats> {
        let tape = Tape::new();
        let x = tape.constant(batch.x.clone());
        let y = tape.constant(batch.y.clone());
        let topo_cfg = self.cfg.topo_config();
        let (stats, grads) = match &self.model {
            TrainedModel::Ode(params) => {
                let mv = params.on_tape(&tape, true);
                let fwd = mv.forward(x, y, &self.grid, self.cfg.solver)?;
                if fwd.zt.value().data().iter().any(|v| !v.is_finite()) {
                    return Err(HarnessError::Degenerate(format!("non-finite state at step {}", self.steps)));
                }
                let task = tape.bce_with_logits(fwd.logits, batch.targets.clone())?;
                let mut topo = None;
                let mut norm = None;
                // The persistence term is differentiated on its own tape with
                // respect to z(T); its gradient then enters the model tape as
                // the linear form ⟨z(T), g⟩, whose parameter gradient is the
                // same chain rule.
                let total = total_loss(task, alpha, || {
                    let sub = Tape::new();
                    let leaf = sub.param(fwd.zt.value().clone());
                    let tl = topo_loss(leaf, &topo_cfg)?;
                    let g = sub.backward(tl.loss)?.wrt_or_zeros(leaf);
                    topo = Some(tl.loss.item());
                    norm = Some(g.iter().map(|v| v * v).sum::<f64>().sqrt());
                    Ok(tape.mul_const(fwd.zt, g)?.sum())
                })?;
                let total_value = task.item() + topo.map_or(0.0, |t| alpha * t);
                let stats = StepStats {
                    task_loss: task.item(),
                    topo_loss: topo,
                    total_loss: total_value,
                    grad_norm: norm,
                    representation: fwd.zt.value().clone(),
                };
                (stats, gradients(&tape, total, &mv.vars)?)
            }
            TrainedModel::Contrastive(params) => {
                let cv = params.on_tape(&tape, true);
                let out = cv.forward(x, y)?;
                let task = tape.bce_with_logits(out.logits, batch.targets.clone())?;
                let total = tape.add(task, cv.info_nce(out.ex, out.ey)?)?;
                let stats = StepStats {
                    task_loss: task.item(),
                    topo_loss: None,
                    total_loss: total.item(),
                    grad_norm: None,
                    representation: out.representation.value().clone(),
                };
                (stats, gradients(&tape, total, &cv.vars)?)
            }
        };
        if !stats.total_loss.is_finite() || stats.total_loss > DIVERGENCE_LOSS {
            return Err(HarnessError::Degenerate(format!(
                "loss diverged to {} at step {}",
                stats.total_loss, self.steps
            )));
        }
        let mut tensors = match &mut self.model {
            TrainedModel::Ode(p) => p.tensors_mut(),
            TrainedModel::Contrastive(p) => p.tensors_mut(),
        };
        self.optimizer.update(&mut tensors, &grads)?;
        if !self.model.is_finite() {
            return Err(HarnessError::Degenerate(format!("non-finite parameters after step {}", self.steps)));
        }
        self.steps += 1;
        Ok(stats)
    }

    /// One pass over shuffled training rows. Returns the mean NS of the
    /// batch representations seen.
    pub fn epoch(&mut self, data: &TaskData, epoch: usize, alpha: f64) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut ns_sum = 0.0;
        let mut ns_count = 0usize;
        for idx in order.chunks(self.cfg.batch_size) {
            if idx.len() < overlap_net::MIN_BATCH {
                continue;
            }
            let batch = data.train.rows(idx);
            let stats = self.step(&batch, alpha)?;
            let ns = self.projection.entropies(&stats.representation)?;
            ns_sum += ns.iter().sum::<f64>();
            ns_count += ns.len();
            let mut flags = Vec::new();
            if let Some(norm) = stats.grad_norm {
                if self.health.push(norm) {
                    flags.push("grad_spike".to_string());
                }
                if self.health.remediation() && !self.remediation_logged {
                    self.remediation_logged = true;
                    flags.push(format!("remediate: {REMEDIATION_HINT}"));
                }
            }
            let index = self.steps - 1;
            if index % self.cfg.log_every == 0 {
                let (tau, pd) = tension_of(&stats.representation)?;
                self.log.push(MetricsRow {
                    epoch,
                    step: index,
                    alpha,
                    task_loss: stats.task_loss,
                    topo_loss: stats.topo_loss,
                    total_loss: stats.total_loss,
                    tau,
                    ns: ns.iter().sum::<f64>() / ns.len() as f64,
                    beta1: pd.total_persistence(1),
                    grad_norm: stats.grad_norm,
                    flags,
                });
                self.snapshots.push(stats.representation);
            }
        }
        Ok(if ns_count > 0 { ns_sum / ns_count as f64 } else { 0.0 })
    }
}

/// Everything a finished (or aborted) run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub condition: Condition,
    pub seed: u64,
    pub param_count: usize,
    pub log: MetricsLog,
    pub health: GradientHealthLog,
    pub snapshots: Vec<Tensor>,
    pub model: TrainedModel,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub aborted: Option<String>,
    /// Validation accuracy after every completed epoch.
    pub val_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
    pub final_eval: Option<Evaluation>,
}

/// Trains one condition on `data` until `epochs` or until validation
/// accuracy has not improved for `patience` epochs. Divergence ends the run
/// with an aborted record instead of an error.
pub fn run_condition(cfg: &ExperimentConfig, seed: u64, data: &TaskData) -> Result<RunOutcome> {
    cfg.validate()?;
    let schedule: AlphaSchedule = cfg.effective_alpha();
    let mut tracker = schedule.tracker()?;
    let mut trainer = Trainer::new(cfg, seed)?;
    let mut val_history = Vec::new();
    let mut alpha_history = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut previous_ns = None;
    let mut aborted = None;
    let mut stopped_early = false;
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let alpha = tracker.at_epoch(epoch, previous_ns);
        alpha_history.push(alpha);
        match trainer.epoch(data, epoch, alpha) {
            Ok(ns) => previous_ns = Some(ns),
            Err(HarnessError::Degenerate(msg)) => {
                aborted = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
        epochs_run = epoch + 1;
        let acc = trainer.model.accuracy(&data.val, cfg)?;
        val_history.push(acc);
        if acc > best {
            best = acc;
            best_epoch = epoch;
        } else if epoch - best_epoch >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    let final_eval = match aborted {
        None => Some(trainer.model.evaluate(&data.val, cfg, seed)?),
        Some(_) => None,
    };
    Ok(RunOutcome {
        condition: cfg.condition,
        seed,
        param_count: trainer.model.param_count(),
        log: trainer.log,
        health: trainer.health,
        snapshots: trainer.snapshots,
        model: trainer.model,
        epochs_run,
        stopped_early,
        aborted,
        val_history,
        alpha_history,
        final_eval,
    })
}
