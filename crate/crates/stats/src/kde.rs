use crate::error::{finite, need, Result, StatsError};
use crate::summary::{quantile_sorted, variance};

/// Grid resolution of the density estimate.
pub const KDE_GRID: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Silverman's rule of thumb: `0.9 · min(sd, IQR/1.34) · n^(-1/5)`.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    need(2, sample.len())?;
    let sd = variance(sample).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(StatsError::Degenerate("zero variance".into()));
    }
    Ok(0.9 * spread * (sample.len() as f64).powf(-0.2))
}

/// Gaussian kernel density on [`KDE_GRID`] points spanning the sample
/// range padded by three bandwidths.
pub fn kde(sample: &[f64], bandwidth: Option<f64>) -> Result<Kde> {
    need(2, sample.len())?;
    finite(sample)?;
    if !(variance(sample) > 0.0) {
        return Err(StatsError::Degenerate("zero variance".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(StatsError::Parameter(format!("bandwidth {h}"))),
        None => silverman_bandwidth(sample)?,
    };
    let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..KDE_GRID).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&g| {
            norm * sample
                .iter()
                .map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(Kde {
        bandwidth: h,
        grid,
        density,
    })
}

/// Locations where the second difference of the density changes sign,
/// linearly interpolated between grid points.
///
/// Second differences smaller than `1e-9` of the largest one are treated as
/// zero so rounding noise in the far tails does not register.
pub fn kde_inflections(sample: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    need(20, sample.len())?;
    let k = kde(sample, bandwidth)?;
    Ok(inflections(&k))
}

pub fn inflections(k: &Kde) -> Vec<f64> {
    let f = &k.density;
    let d2: Vec<f64> = (1..f.len() - 1)
        .map(|i| f[i - 1] - 2.0 * f[i] + f[i + 1])
        .collect();
    let scale = d2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-9 * scale;
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in d2.iter().enumerate() {
        if v.abs() <= floor {
            continue;
        }
        if let Some(j) = last {
            if (d2[j] > 0.0) != (v > 0.0) {
                // d2[j] sits at grid point j + 1
                let (xa, xb) = (k.grid[j + 1], k.grid[i + 1]);
                let t = d2[j] / (d2[j] - v);
                out.push(xa + t * (xb - xa));
            }
        }
        last = Some(i);
    }
    out
}

/// Lowest density point between the two highest local maxima, if the
/// density has at least two.
pub fn antimode(k: &Kde) -> Option<f64> {
    let f = &k.density;
    let mut peaks: Vec<usize> = (1..f.len() - 1)
        .filter(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1])
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|&a, &b| f[b].total_cmp(&f[a]));
    let (a, b) = (peaks[0].min(peaks[1]), peaks[0].max(peaks[1]));
    let lowest = (a..=b).min_by(|&i, &j| f[i].total_cmp(&f[j]))?;
    Some(k.grid[lowest])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_integrates_to_one() {
        let sample: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let k = kde(&sample, None).unwrap();
        let step = k.grid[1] - k.grid[0];
        let total: f64 = k.density.iter().sum::<f64>() * step;
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(
            kde_inflections(&[2.0; 30], None),
            Err(StatsError::Degenerate(_))
        ));
    }
}
