use serde::{Deserialize, Serialize};

use crate::dip::dip_test;
use crate::error::{need, Result, StatsError};
use crate::gmm::gmm2_bic;
use crate::kde::{antimode, inflections, kde};
use crate::pelt::pelt;
use crate::summary::{mean, median_filter, quantile_sorted};

/// Largest allowed pairwise spread of the three κ* estimates.
pub const AGREEMENT_TOLERANCE: f64 = 0.05;
/// Window of the running median applied to τ before changepoint search.
pub const TAU_SMOOTHING_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub dip: f64,
    pub dip_p: f64,
    pub kde_inflections: Vec<f64>,
    pub gmm_bic_1: f64,
    pub gmm_bic_2: f64,
    pub gmm_crossover: Option<f64>,
    /// Midpoint of the widest gap between the 10th and 90th percentiles,
    /// only when the dip test rejects unimodality at 0.05.
    pub dip_gap_midpoint: Option<f64>,
    /// Midpoint of the two density inflections bracketing the antimode.
    pub kde_candidate: Option<f64>,
    pub agreement: bool,
    pub kappa_star: Option<f64>,
    pub kappa_star_star: Option<f64>,
    pub changepoints: Vec<usize>,
    pub tau_smoothing_window: usize,
}

fn widest_gap_midpoint(sorted: &[f64]) -> Option<f64> {
    let lo = quantile_sorted(sorted, 0.1);
    let hi = quantile_sorted(sorted, 0.9);
    let inner: Vec<f64> = sorted.iter().copied().filter(|&v| v >= lo && v <= hi).collect();
    inner
        .windows(2)
        .max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
        .filter(|w| w[1] > w[0])
        .map(|w| 0.5 * (w[0] + w[1]))
}

/// Upper threshold from τ ordered by NS: the first PELT changepoint of the
/// median-smoothed τ series across which the segment mean falls by more
/// than half. Returns the NS midpoint there and all changepoints.
pub fn upper_threshold(ns: &[f64], tau: &[f64]) -> Result<(Option<f64>, Vec<usize>)> {
    if ns.len() != tau.len() {
        return Err(StatsError::Parameter("ns and tau lengths differ".into()));
    }
    need(4, ns.len())?;
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by(|&a, &b| ns[a].total_cmp(&ns[b]).then(a.cmp(&b)));
    let ns_sorted: Vec<f64> = order.iter().map(|&i| ns[i]).collect();
    let tau_sorted: Vec<f64> = order.iter().map(|&i| tau[i]).collect();
    let smooth = median_filter(&tau_sorted, TAU_SMOOTHING_WINDOW);
    let cps = pelt(&smooth, None)?;
    let mut bounds = vec![0];
    bounds.extend(&cps);
    bounds.push(smooth.len());
    for k in 1..bounds.len() - 1 {
        let before = mean(&smooth[bounds[k - 1]..bounds[k]]);
        let after = mean(&smooth[bounds[k]..bounds[k + 1]]);
        if before > 0.0 && after < 0.5 * before {
            let c = bounds[k];
            return Ok((Some(0.5 * (ns_sorted[c - 1] + ns_sorted[c])), cps));
        }
    }
    Ok((None, cps))
}

/// Runs dip, KDE and GMM detection on NS values and, given τ values paired
/// with them, the changepoint search for the upper threshold.
///
/// κ* is declared only when all three lower-threshold estimates exist and
/// agree pairwise within [`AGREEMENT_TOLERANCE`]; it is then their mean.
pub fn threshold_report(ns: &[f64], tau: Option<&[f64]>, seed: u64) -> Result<ThresholdReport> {
    need(20, ns.len())?;
    let mut sorted = ns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dip = dip_test(ns, seed)?;
    let density = kde(ns, None)?;
    let infl = inflections(&density);
    let gmm = gmm2_bic(ns, seed)?;

    let gap = (dip.p_value < 0.05)
        .then(|| widest_gap_midpoint(&sorted))
        .flatten();
    let kde_candidate = antimode(&density).and_then(|am| {
        let left = infl.iter().copied().filter(|&v| v < am).fold(None, |m: Option<f64>, v| {
            Some(m.map_or(v, |m| m.max(v)))
        });
        let right = infl.iter().copied().filter(|&v| v > am).fold(None, |m: Option<f64>, v| {
            Some(m.map_or(v, |m| m.min(v)))
        });
        Some(0.5 * (left? + right?))
    });
    let estimates = [gap, kde_candidate, gmm.crossover];
    let agreement = match estimates {
        [Some(a), Some(b), Some(c)] => {
            (a - b).abs() <= AGREEMENT_TOLERANCE
                && (a - c).abs() <= AGREEMENT_TOLERANCE
                && (b - c).abs() <= AGREEMENT_TOLERANCE
        }
        _ => false,
    };
    let kappa_star = agreement.then(|| estimates.iter().flatten().sum::<f64>() / 3.0);

    let (kappa_star_star, changepoints) = match tau {
        Some(t) => upper_threshold(ns, t)?,
        None => (None, Vec::new()),
    };
    Ok(ThresholdReport {
        n: ns.len(),
        dip: dip.dip,
        dip_p: dip.p_value,
        kde_inflections: infl,
        gmm_bic_1: gmm.bic1,
        gmm_bic_2: gmm.bic2,
        gmm_crossover: gmm.crossover,
        dip_gap_midpoint: gap,
        kde_candidate,
        agreement,
        kappa_star,
        kappa_star_star,
        changepoints,
        tau_smoothing_window: TAU_SMOOTHING_WINDOW,
    })
}
