use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{finite, need, Result, StatsError};
use crate::summary::mean;

pub const GMM_RESTARTS: usize = 10;
const MAX_ITER: usize = 2000;
const TOL: f64 = 1e-8;
const MIN_VAR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

impl Component {
    fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        self.weight.ln() - 0.5 * (2.0 * std::f64::consts::PI * self.var).ln() - d * d / (2.0 * self.var)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub bic1: f64,
    pub bic2: f64,
    /// Two-component fit, means ascending.
    pub components: [Component; 2],
    pub log_likelihood2: f64,
    /// Equal weighted-density point between the means; only when the two
    /// component model has the lower BIC.
    pub crossover: Option<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_likelihood(x: &[f64], c: &[Component; 2]) -> f64 {
    x.iter()
        .map(|&v| log_sum_exp(c[0].log_density(v), c[1].log_density(v)))
        .sum()
}

/// One EM run from the given start. `None` if a variance collapses.
fn em(x: &[f64], mut c: [Component; 2]) -> Option<([Component; 2], f64)> {
    let n = x.len() as f64;
    let mut resp = vec![0.0; x.len()];
    let mut ll = log_likelihood(x, &c);
    for _ in 0..MAX_ITER {
        for (r, &v) in resp.iter_mut().zip(x) {
            let (a, b) = (c[0].log_density(v), c[1].log_density(v));
            *r = (a - log_sum_exp(a, b)).exp();
        }
        let n0: f64 = resp.iter().sum();
        let n1 = n - n0;
        if n0 <= 0.0 || n1 <= 0.0 {
            return None;
        }
        let m0 = resp.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() / n0;
        let m1 = resp.iter().zip(x).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / n1;
        let v0 = resp.iter().zip(x).map(|(r, v)| r * (v - m0).powi(2)).sum::<f64>() / n0;
        let v1 = resp
            .iter()
            .zip(x)
            .map(|(r, v)| (1.0 - r) * (v - m1).powi(2))
            .sum::<f64>()
            / n1;
        if !(v0 >= MIN_VAR && v1 >= MIN_VAR) {
            return None;
        }
        c = [
            Component {
                weight: n0 / n,
                mean: m0,
                var: v0,
            },
            Component {
                weight: n1 / n,
                mean: m1,
                var: v1,
            },
        ];
        let next = log_likelihood(x, &c);
        let delta = next - ll;
        ll = next;
        if delta.abs() < TOL {
            break;
        }
    }
    ll.is_finite().then_some((c, ll))
}

/// Point between the two means where the weighted component densities are
/// equal, by bisection on their log ratio.
fn crossover(c: &[Component; 2]) -> Option<f64> {
    let (mut lo, mut hi) = (c[0].mean, c[1].mean);
    let g = |x: f64| c[0].log_density(x) - c[1].log_density(x);
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(lo);
    }
    if (glo > 0.0) == (ghi > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// One- and two-component Gaussian mixtures by EM with BIC.
///
/// The two-component fit keeps the best of [`GMM_RESTARTS`] runs seeded
/// k-means++ style; collapsed runs are discarded.
pub fn gmm2_bic(sample: &[f64], seed: u64) -> Result<GmmFit> {
    need(20, sample.len())?;
    finite(sample)?;
    let x = sample;
    let n = x.len() as f64;
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if !(var >= MIN_VAR) {
        return Err(StatsError::Degenerate("zero variance".into()));
    }
    let ll1: f64 = x
        .iter()
        .map(|v| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m).powi(2) / (2.0 * var))
        .sum();
    let bic1 = 2.0 * n.ln() - 2.0 * ll1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<([Component; 2], f64)> = None;
    for _ in 0..GMM_RESTARTS {
        let first = x[rng.random_range(0..x.len())];
        let d2: Vec<f64> = x.iter().map(|v| (v - first).powi(2)).collect();
        let total: f64 = d2.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut second = x[x.len() - 1];
        for (v, w) in x.iter().zip(&d2) {
            if pick < *w {
                second = *v;
                break;
            }
            pick -= w;
        }
        let start = [
            Component {
                weight: 0.5,
                mean: first,
                var,
            },
            Component {
                weight: 0.5,
                mean: second,
                var,
            },
        ];
        if let Some((c, ll)) = em(x, start) {
            if best.as_ref().is_none_or(|b| ll > b.1) {
                best = Some((c, ll));
            }
        }
    }
    let (mut c, ll2) =
        best.ok_or_else(|| StatsError::Fit("every EM restart collapsed".into()))?;
    if c[0].mean > c[1].mean {
        c.swap(0, 1);
    }
    let bic2 = 5.0 * n.ln() - 2.0 * ll2;
    Ok(GmmFit {
        bic1,
        bic2,
        components: c,
        log_likelihood2: ll2,
        crossover: if bic2 < bic1 { crossover(&c) } else { None },
    })
}
