use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{finite, need, Result, StatsError};

/// Monte-Carlo draws used for dip p-values.
pub const DIP_DRAWS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    pub dip: f64,
    pub p_value: f64,
    /// Modal interval `[x_low, x_high]` of the closest unimodal fit.
    pub modal_interval: (f64, f64),
}

/// Hartigan's dip of an ascending sample, with the modal interval indices.
///
/// Follows the classical greatest-convex-minorant / least-concave-majorant
/// iteration. Values are handled on the `2n·dip` scale internally.
pub fn dip_sorted(x: &[f64]) -> (f64, usize, usize) {
    let n = x.len();
    if n < 2 || x[0] == x[n - 1] {
        return (0.5 / n.max(1) as f64, 0, n.saturating_sub(1));
    }
    // 1-based working copies keep the index arithmetic of the algorithm.
    let xs: Vec<f64> = std::iter::once(0.0).chain(x.iter().copied()).collect();
    let mut mn = vec![0usize; n + 1];
    let mut mj = vec![0usize; n + 1];
    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];

    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            let mnmnj = mn[mnj];
            if mnj == 1
                || (xs[j] - xs[mnj]) * ((mnj - mnmnj) as f64)
                    < (xs[mnj] - xs[mnmnj]) * ((j - mnj) as f64)
            {
                break;
            }
            mn[j] = mnmnj;
        }
    }
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            let mjmjk = mj[mjk];
            if mjk == n
                || (xs[k] - xs[mjk]) * (mjk as f64 - mjmjk as f64)
                    < (xs[mjk] - xs[mjmjk]) * (k as f64 - mjk as f64)
            {
                break;
            }
            mj[k] = mjmjk;
        }
    }

    let mut low = 1usize;
    let mut high = n;
    let mut dip = 1.0f64;
    loop {
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;

        lcm[1] = low;
        let mut i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2usize;

        let mut d = 0.0f64;
        if l_gcm != 2 || l_lcm != 2 {
            loop {
                let gcmix = gcm[ix];
                let lcmiv = lcm[iv];
                if gcmix > lcmiv {
                    let gcmi1 = gcm[ix + 1];
                    let dx = (lcmiv as f64 - gcmi1 as f64 + 1.0)
                        - (xs[lcmiv] - xs[gcmi1]) * (gcmix as f64 - gcmi1 as f64)
                            / (xs[gcmix] - xs[gcmi1]);
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcmiv1 = lcm[iv - 1];
                    let dx = (xs[gcmix] - xs[lcmiv1]) * (lcmiv as f64 - lcmiv1 as f64)
                        / (xs[lcmiv] - xs[lcmiv1])
                        - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                if ix < 1 {
                    ix = 1;
                }
                if iv > l_lcm {
                    iv = l_lcm;
                }
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }
        if d < dip {
            break;
        }

        let mut dip_l = 0.0f64;
        for j in ig..l_gcm {
            let mut max_t = 1.0f64;
            let (jb, je) = (gcm[j + 1], gcm[j]);
            if je - jb > 1 && xs[je] != xs[jb] {
                let c = (je - jb) as f64 / (xs[je] - xs[jb]);
                for jj in jb..=je {
                    let t = (jj - jb + 1) as f64 - (xs[jj] - xs[jb]) * c;
                    max_t = max_t.max(t);
                }
            }
            dip_l = dip_l.max(max_t);
        }
        let mut dip_u = 0.0f64;
        for j in ih..l_lcm {
            let mut max_t = 1.0f64;
            let (jb, je) = (lcm[j], lcm[j + 1]);
            if je - jb > 1 && xs[je] != xs[jb] {
                let c = (je - jb) as f64 / (xs[je] - xs[jb]);
                for jj in jb..=je {
                    let t = (xs[jj] - xs[jb]) * c - (jj as f64 - jb as f64 - 1.0);
                    max_t = max_t.max(t);
                }
            }
            dip_u = dip_u.max(max_t);
        }
        dip = dip.max(dip_u.max(dip_l));

        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }
    (dip / (2 * n) as f64, low - 1, high - 1)
}

/// Dip statistic of an unordered sample.
pub fn dip_statistic(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    dip_sorted(&x).0
}

type NullKey = (usize, u64, usize);

fn null_cache() -> &'static Mutex<HashMap<NullKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Sorted dip values of `draws` uniform samples of size `n`. Cached per
/// `(n, seed, draws)`.
pub fn uniform_null(n: usize, seed: u64, draws: usize) -> Arc<Vec<f64>> {
    let key = (n, seed, draws);
    if let Some(v) = null_cache().lock().expect("cache lock").get(&key) {
        return Arc::clone(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let mut buf = vec![0.0; n];
    let mut dips: Vec<f64> = (0..draws)
        .map(|_| {
            buf.iter_mut().for_each(|v| *v = rng.random::<f64>());
            buf.sort_by(f64::total_cmp);
            dip_sorted(&buf).0
        })
        .collect();
    dips.sort_by(f64::total_cmp);
    let dips = Arc::new(dips);
    null_cache()
        .lock()
        .expect("cache lock")
        .insert(key, Arc::clone(&dips));
    dips
}

/// Dip test of unimodality with a Monte-Carlo p-value against uniform
/// samples of the same size: `(1 + #{null ≥ dip}) / (1 + draws)`.
pub fn dip_test(sample: &[f64], seed: u64) -> Result<DipResult> {
    dip_test_with(sample, seed, DIP_DRAWS)
}

pub fn dip_test_with(sample: &[f64], seed: u64, draws: usize) -> Result<DipResult> {
    need(10, sample.len())?;
    finite(sample)?;
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    if x[0] == x[x.len() - 1] {
        return Err(StatsError::Degenerate("constant sample".into()));
    }
    let (dip, lo, hi) = dip_sorted(&x);
    let null = uniform_null(x.len(), seed, draws);
    let below = null.partition_point(|&d| d < dip);
    let exceed = null.len() - below;
    Ok(DipResult {
        dip,
        p_value: (1 + exceed) as f64 / (1 + draws) as f64,
        modal_interval: (x[lo], x[hi]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let d = dip_statistic(&x);
        assert!(d >= 1.0 / 100.0 - 1e-15 && d <= 0.25);
    }

    #[test]
    fn two_clusters_dip_larger_than_evenly_spaced() {
        let even: Vec<f64> = (0..40).map(f64::from).collect();
        let split: Vec<f64> = (0..40)
            .map(|i| if i < 20 { i as f64 * 0.01 } else { 100.0 + i as f64 * 0.01 })
            .collect();
        assert!(dip_statistic(&split) > 2.0 * dip_statistic(&even));
    }

    #[test]
    fn constant_sample_is_degenerate() {
        assert!(matches!(
            dip_test(&[1.0; 20], 0),
            Err(StatsError::Degenerate(_))
        ));
        assert!(matches!(dip_test(&[1.0, 2.0], 0), Err(StatsError::TooFew { .. })));
    }
}
