use crate::error::{finite, need, Result};

/// Segment costs for a Gaussian mean-shift model: residual sum of squares
/// of each segment about its own mean, from prefix sums.
pub struct MeanShiftCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl MeanShiftCost {
    pub fn new(x: &[f64]) -> Self {
        let mut s1 = vec![0.0; x.len() + 1];
        let mut s2 = vec![0.0; x.len() + 1];
        for (i, v) in x.iter().enumerate() {
            s1[i + 1] = s1[i] + v;
            s2[i + 1] = s2[i] + v * v;
        }
        Self { s1, s2 }
    }

    /// Cost of the half-open segment `start..end`.
    pub fn cost(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let sum = self.s1[end] - self.s1[start];
        (self.s2[end] - self.s2[start] - sum * sum / len).max(0.0)
    }
}

/// Noise variance estimated from first differences, `Σ(Δx)² / (2(n-1))`,
/// which a level shift barely moves.
pub fn difference_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (2.0 * (x.len() - 1) as f64)
}

/// Default penalty `2 · ln n · σ̂²`, floored so a constant series still pays
/// for a changepoint.
pub fn default_penalty(x: &[f64]) -> f64 {
    let scale = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    let var = difference_variance(x).max(1e-12 * (1.0 + scale));
    2.0 * (x.len() as f64).ln() * var
}

/// Pruned exact linear time changepoint detection.
///
/// Returns the start indices of every segment after the first, so a jump
/// between `x[49]` and `x[50]` is reported as `50`.
pub fn pelt(x: &[f64], penalty: Option<f64>) -> Result<Vec<usize>> {
    need(4, x.len())?;
    finite(x)?;
    let beta = penalty.unwrap_or_else(|| default_penalty(x));
    let n = x.len();
    let cost = MeanShiftCost::new(x);
    let mut f = vec![0.0; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -beta;
    let mut candidates = vec![0usize];
    let slack = 1e-9 * (1.0 + beta.abs() + cost.cost(0, n));
    for t in 1..=n {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for &s in &candidates {
            let v = f[s] + cost.cost(s, t) + beta;
            if v < best {
                best = v;
                arg = s;
            }
        }
        f[t] = best;
        last[t] = arg;
        candidates.retain(|&s| f[s] + cost.cost(s, t) <= f[t] + slack);
        candidates.push(t);
    }
    Ok(backtrack(&last, n))
}

pub(crate) fn backtrack(last: &[usize], n: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        if s > 0 {
            cps.push(s);
        }
        t = s;
    }
    cps.reverse();
    cps
}
