use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{finite, need, Result, StatsError};
use crate::summary::{mean, variance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub delta: f64,
    pub alpha: f64,
    /// Standardised mean difference (Cohen's d, pooled SD).
    pub d: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// p-value of the test against `d ≤ -Δ`.
    pub p_lower: f64,
    /// p-value of the test against `d ≥ Δ`.
    pub p_upper: f64,
    pub equivalent: bool,
    /// Per-group size the sample-size formula asks for at 80% power.
    pub n_required: u64,
}

/// Two one-sided tests for equivalence on the Cohen's d scale.
///
/// `d` has standard error `sqrt(1/n_a + 1/n_b)` and the `(1-2α)` interval
/// uses Student t quantiles with `n_a + n_b - 2` degrees of freedom.
/// Equivalence holds iff the interval lies strictly inside `(-Δ, Δ)`, which
/// is the same as both one-sided tests rejecting at `α`.
pub fn tost(a: &[f64], b: &[f64], delta: f64, alpha: f64) -> Result<TostResult> {
    need(3, a.len())?;
    need(3, b.len())?;
    finite(a)?;
    finite(b)?;
    if !(delta > 0.0) {
        return Err(StatsError::Parameter(format!("margin must be > 0, got {delta}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(StatsError::Parameter(format!("alpha must be in (0, 0.5), got {alpha}")));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / df).sqrt();
    if !(pooled > 0.0) {
        return Err(StatsError::Degenerate("zero pooled variance".into()));
    }
    let d = (mean(a) - mean(b)) / pooled;
    let se = (1.0 / na + 1.0 / nb).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    let q = t.inverse_cdf(1.0 - alpha);
    let (ci_low, ci_high) = (d - q * se, d + q * se);
    let p_lower = 1.0 - t.cdf((d + delta) / se);
    let p_upper = t.cdf((d - delta) / se);
    Ok(TostResult {
        delta,
        alpha,
        d,
        ci_low,
        ci_high,
        p_lower,
        p_upper,
        equivalent: ci_low > -delta && ci_high < delta,
        n_required: sample_size_formula(delta, 0.8, alpha),
    })
}

/// Per-group size printed alongside the formula for `Δ = 0.2`, 80% power,
/// `α = 0.05`. It does not follow from the formula, which gives 310.
pub const STATED_SAMPLE_SIZE: u64 = 192;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// `ceil(2 (z_{1-α} + z_{1-β})² / Δ²)`, at least 1.
    pub formula: u64,
    /// The separately stated value for the reference parameters, if these
    /// are the reference parameters.
    pub stated: Option<u64>,
    /// `stated` is present and differs from `formula`.
    pub discrepancy: bool,
}

pub fn sample_size_formula(delta: f64, power: f64, alpha: f64) -> u64 {
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let s = z.inverse_cdf(1.0 - alpha) + z.inverse_cdf(power);
    let n = 2.0 * s * s / (delta * delta);
    (n.ceil() as u64).max(1)
}

pub fn tost_sample_size(delta: f64, power: f64, alpha: f64) -> Result<SampleSize> {
    if !(alpha > 0.0 && alpha < 0.5) || !(power > 0.0 && power < 1.0) || !(delta > 0.0) {
        return Err(StatsError::Parameter(format!(
            "need 0<α<0.5, 0<power<1, Δ>0; got α={alpha}, power={power}, Δ={delta}"
        )));
    }
    let formula = sample_size_formula(delta, power, alpha);
    let reference = (delta - 0.2).abs() < 1e-12
        && (power - 0.8).abs() < 1e-12
        && (alpha - 0.05).abs() < 1e-12;
    let stated = reference.then_some(STATED_SAMPLE_SIZE);
    Ok(SampleSize {
        formula,
        stated,
        discrepancy: stated.is_some_and(|s| s != formula),
    })
}
