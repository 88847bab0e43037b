use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum DecayMode {
    #[default]
    Constant,
    /// Straight line from `alpha0` at epoch 0 to `floor` at `epochs`.
    Linear { epochs: usize },
    /// Halves α (down to `floor`) after every epoch whose mean NS exceeds
    /// the upper guard.
    Step,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub alpha0: f64,
    pub floor: f64,
    #[serde(default)]
    pub decay: DecayMode,
    /// Candidate `(κ*, κ**)` band; only the upper edge is acted on.
    #[serde(default)]
    pub guard: Option<(f64, f64)>,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        Self::constant(DEFAULT_ALPHA)
    }
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        Self {
            alpha0: alpha,
            floor: 0.0,
            decay: DecayMode::Constant,
            guard: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor >= 0.0) || !(self.alpha0 >= self.floor) || !self.alpha0.is_finite() {
            return Err(NetError::Parameter(format!(
                "need alpha0 >= floor >= 0, got alpha0={} floor={}",
                self.alpha0, self.floor
            )));
        }
        Ok(())
    }

    pub fn tracker(&self) -> Result<AlphaTracker> {
        self.validate()?;
        Ok(AlphaTracker {
            schedule: *self,
            current: self.alpha0,
        })
    }
}

/// Running α for one training run.
#[derive(Clone, Debug)]
pub struct AlphaTracker {
    schedule: AlphaSchedule,
    current: f64,
}

impl AlphaTracker {
    pub fn alpha(&self) -> f64 {
        self.current
    }

    /// α for `epoch`, given the mean NS observed over the previous epoch.
    pub fn at_epoch(&mut self, epoch: usize, previous_ns: Option<f64>) -> f64 {
        let s = &self.schedule;
        self.current = match s.decay {
            DecayMode::Constant => s.alpha0,
            DecayMode::Linear { epochs } => {
                if epochs == 0 || epoch >= epochs {
                    s.floor
                } else {
                    s.alpha0 + (s.floor - s.alpha0) * epoch as f64 / epochs as f64
                }
            }
            DecayMode::Step => match (s.guard, previous_ns) {
                (Some((_, upper)), Some(ns)) if ns > upper => (self.current / 2.0).max(s.floor),
                _ => self.current,
            },
        };
        self.current
    }
}
