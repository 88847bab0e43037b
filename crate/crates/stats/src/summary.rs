use crate::error::{need, Result, StatsError};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(StatsError::Parameter(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    need(3, a.len())?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(StatsError::Degenerate("zero variance".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Error type ratio: share of structurally wrong answers among all wrong
/// answers, `p_b / (p_b + p_c + p_d)`.
pub fn etr(p_b: f64, p_c: f64, p_d: f64) -> Result<f64> {
    if [p_b, p_c, p_d].iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(StatsError::Parameter("rates must be finite and >= 0".into()));
    }
    let total = p_b + p_c + p_d;
    if total == 0.0 {
        return Err(StatsError::Degenerate("no incorrect responses".into()));
    }
    Ok(p_b / total)
}

/// Running median over a centred window, shrinking at the edges.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            median(&x[lo..hi])
        })
        .collect()
}
