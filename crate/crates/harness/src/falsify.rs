use overlap_stats::{tost, TostResult};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const FALSIFICATION_DELTA: f64 = 0.2;
pub const FALSIFICATION_ALPHA: f64 = 0.05;

/// Equivalence check of two τ samples. In the experiments the groups are
/// τ of uoo-trained and of over-entangled models, a computational analog
/// of the two human groups the test was designed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub tost: TostResult,
    /// Raised when the two groups are equivalent within the margin.
    pub falsified: bool,
    /// The smaller group is below the size needed for 80% power.
    pub underpowered: bool,
    pub n_a: usize,
    pub n_b: usize,
}

pub fn tost_falsification(tau_a: &[f64], tau_b: &[f64]) -> Result<FalsificationReport> {
    let t = tost(tau_a, tau_b, FALSIFICATION_DELTA, FALSIFICATION_ALPHA)?;
    Ok(FalsificationReport {
        falsified: t.equivalent,
        underpowered: (tau_a.len().min(tau_b.len()) as u64) < t.n_required,
        tost: t,
        n_a: tau_a.len(),
        n_b: tau_b.len(),
    })
}
