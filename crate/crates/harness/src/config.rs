use std::fmt;

use overlap_net::{
    sha256_hex, AlphaSchedule, ContrastiveConfig, EntangleMode, ModelConfig, Solver,
    TopoLossConfig, DEFAULT_EMBED, DEFAULT_LAMBDA, DEFAULT_TEMPERATURE,
};
use overlap_synth::DIM;
use overlap_topo::EPS_MIN;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::canonical_json;

/// Allowed relative gap between a condition's parameter count and the budget.
pub const CAPACITY_TOLERANCE: f64 = 0.05;
pub const DEFAULT_PARAM_BUDGET: usize = 500_000;
pub const DEFAULT_LOG_EVERY: usize = 50;
/// Epochs without validation improvement before a run stops.
pub const DEFAULT_PATIENCE: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Entanglement, ODE and the topological term.
    Uoo,
    /// Entanglement and ODE with α = 0.
    OdeAblation,
    /// Two independent encoders aligned by cosine similarity.
    Contrastive,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Contrastive, Condition::Uoo, Condition::OdeAblation];

    /// Letter used in reports: (a) contrastive, (b) uoo, (c) ablation.
    pub fn letter(self) -> &'static str {
        match self {
            Condition::Contrastive => "a",
            Condition::Uoo => "b",
            Condition::OdeAblation => "c",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Uoo => "uoo",
            Condition::OdeAblation => "ode_ablation",
            Condition::Contrastive => "contrastive",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub condition: Condition,
    pub family: String,
    /// Rows generated for the training family.
    pub n: usize,
    pub entanglement: f64,
    /// Rows generated for the unseen family used in transfer evaluation.
    pub transfer_n: usize,
    pub latent: usize,
    pub hidden: usize,
    pub entangle: EntangleMode,
    pub alpha: AlphaSchedule,
    pub lambda: f64,
    pub eps_min: f64,
    pub max_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub log_every: usize,
    pub param_budget: usize,
    pub lr: f64,
    pub val_fraction: f64,
    pub patience: usize,
    pub solver: Solver,
    pub grid_points: usize,
    /// Reshape used for NS; a fixed projection is inserted when its product
    /// differs from the representation size.
    pub ns_shape: (usize, usize),
    /// Rows of the evaluation split whose representation feeds τ and β₁.
    pub eval_batch: usize,
    /// Encoder width of the contrastive baseline; matched to the budget
    /// when absent.
    pub contrastive_hidden: Option<usize>,
    pub contrastive_embed: usize,
    pub temperature: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            condition: Condition::Uoo,
            family: "xor64".into(),
            n: 2000,
            entanglement: 0.0,
            transfer_n: 1000,
            latent: 96,
            hidden: 256,
            entangle: EntangleMode::Full,
            alpha: AlphaSchedule::default(),
            lambda: DEFAULT_LAMBDA,
            eps_min: EPS_MIN,
            max_dim: 1,
            epochs: 200,
            batch_size: 64,
            seeds: vec![0, 1, 2],
            log_every: DEFAULT_LOG_EVERY,
            param_budget: DEFAULT_PARAM_BUDGET,
            lr: 1e-3,
            val_fraction: 0.2,
            patience: DEFAULT_PATIENCE,
            solver: Solver::Rk4,
            grid_points: 20,
            ns_shape: (8, 12),
            eval_batch: 64,
            contrastive_hidden: None,
            contrastive_embed: DEFAULT_EMBED,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Small budget used by tests and the CLI smoke config.
    pub fn smoke() -> Self {
        Self {
            n: 256,
            transfer_n: 128,
            epochs: 2,
            seeds: vec![0],
            ..Self::default()
        }
    }

    pub fn with_condition(&self, condition: Condition) -> Self {
        Self {
            condition,
            ..self.clone()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d1: DIM,
            d2: DIM,
            latent: self.latent,
            hidden: self.hidden,
            entangle: self.entangle,
            allow_low_rank: false,
        }
    }

    pub fn contrastive_config(&self) -> ContrastiveConfig {
        let mut c = ContrastiveConfig::matched(DIM, DIM, self.contrastive_embed, self.param_budget);
        if let Some(h) = self.contrastive_hidden {
            c.hidden = h;
        }
        c.temperature = self.temperature;
        c
    }

    pub fn topo_config(&self) -> TopoLossConfig {
        TopoLossConfig {
            lambda: self.lambda,
            eps_min: self.eps_min,
            max_dim: self.max_dim,
        }
    }

    /// The α schedule actually used: the ablation always trains with zero.
    pub fn effective_alpha(&self) -> AlphaSchedule {
        match self.condition {
            Condition::Uoo => self.alpha,
            _ => AlphaSchedule::constant(0.0),
        }
    }

    pub fn param_count(&self, condition: Condition) -> usize {
        match condition {
            Condition::Contrastive => self.contrastive_config().param_count(),
            _ => self.model_config().param_count(),
        }
    }

    /// Relative gap of every condition's parameter count to the budget.
    pub fn capacity_gaps(&self) -> Vec<(Condition, usize, f64)> {
        Condition::ALL
            .iter()
            .map(|&c| {
                let p = self.param_count(c);
                (c, p, p.abs_diff(self.param_budget) as f64 / self.param_budget as f64)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        overlap_synth::family_hash(&self.family)?;
        if !(0.0..=1.0).contains(&self.entanglement) {
            return Err(bad(format!("entanglement must lie in [0, 1], got {}", self.entanglement)));
        }
        if self.n < 2 * self.batch_size.max(4) {
            return Err(bad(format!("n = {} is too small for batch size {}", self.n, self.batch_size)));
        }
        if self.batch_size < overlap_net::MIN_BATCH || self.eval_batch < overlap_net::MIN_BATCH {
            return Err(bad("batch sizes must be at least 4"));
        }
        if self.epochs == 0 || self.log_every == 0 || self.grid_points < 2 {
            return Err(bad("epochs, log_every must be positive and the grid needs two points"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(bad("val_fraction must lie in (0, 1)"));
        }
        if !(self.lr > 0.0) || !(self.lambda >= 0.0) || !(self.eps_min >= 0.0) {
            return Err(bad("lr must be positive; lambda and eps_min non-negative"));
        }
        if !(1..=2).contains(&self.max_dim) {
            return Err(bad("max_dim must be 1 or 2"));
        }
        if self.ns_shape.0 == 0 || self.ns_shape.1 == 0 {
            return Err(bad("ns_shape entries must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(bad("at least one seed is required"));
        }
        self.alpha.validate()?;
        self.model_config().validate()?;
        self.contrastive_config().validate()?;
        for (c, p, gap) in self.capacity_gaps() {
            if gap >= CAPACITY_TOLERANCE {
                return Err(bad(format!(
                    "{c} has {p} parameters, {:.1}% away from the budget {}",
                    100.0 * gap,
                    self.param_budget
                )));
            }
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        canonical_json(self)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}
