//! Statistics checked against analytic values, brute-force oracles and
//! seeded simulations.

use overlap_stats::{
    dip_statistic, dip_test, etr, gmm2_bic, kde, kde_inflections, pearson, pelt, tost,
    tost_sample_size, MeanShiftCost,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs_free_quantile::normal_quantile;

/// Acklam's rational approximation refined by one Halley step; enough for
/// building a deterministic Gaussian "sample" from evenly spaced quantiles.
mod statrs_free_quantile {
    pub fn normal_quantile(p: f64) -> f64 {
        let a = [
            -3.969683028665376e1,
            2.209460984245205e2,
            -2.759285104469687e2,
            1.383577518672690e2,
            -3.066479806614716e1,
            2.506628277459239,
        ];
        let b = [
            -5.447609879822406e1,
            1.615858368580409e2,
            -1.556989798598866e2,
            6.680131188771972e1,
            -1.328068155288572e1,
        ];
        let c = [
            -7.784894002430293e-3,
            -3.223964580411365e-1,
            -2.400758277161838,
            -2.549732539343734,
            4.374664141464968,
            2.938163982698783,
        ];
        let d = [
            7.784695709041462e-3,
            3.224671290700398e-1,
            2.445134137142996,
            3.754408661907416,
        ];
        let lo = 0.02425;
        if p < lo {
            let q = (-2.0 * p.ln()).sqrt();
            (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
        } else if p > 1.0 - lo {
            -normal_quantile(1.0 - p)
        } else {
            let q = p - 0.5;
            let r = q * q;
            (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
                / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize, mu: f64, sd: f64) -> Vec<f64> {
    let d = Normal::new(mu, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

fn uniforms(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[test]
fn dip_of_evenly_spaced_points_is_minimal() {
    for n in [10usize, 37, 200] {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert!((dip_statistic(&x) - 1.0 / (2.0 * n as f64)).abs() < 1e-12, "n={n}");
    }
}

#[test]
fn dip_of_two_equal_clusters_approaches_a_quarter() {
    // two equal point masses have dip 1/4
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 400;
    let x: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 0.0 } else { 100.0 } + rng.random::<f64>() * 1e-3)
        .collect();
    let d = dip_statistic(&x);
    assert!((d - 0.25).abs() <= 1.0 / n as f64, "dip {d}");
}

#[test]
fn dip_uniform_rarely_rejects() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let accepted = (0..100)
        .filter(|_| dip_test(&uniforms(&mut rng, 200), 7).unwrap().p_value > 0.05)
        .count();
    assert!(accepted >= 95, "{accepted}/100 accepted");
}

#[test]
fn dip_detects_separated_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut x = normals(&mut rng, 100, 0.0, 1.0);
    x.extend(normals(&mut rng, 100, 6.0, 1.0));
    assert!(dip_test(&x, 7).unwrap().p_value < 0.05);
}

#[test]
fn kde_gaussian_has_two_inflections_near_one_sd() {
    let n = 500;
    let x: Vec<f64> = (0..n)
        .map(|i| 3.0 + 2.0 * normal_quantile((i as f64 + 0.5) / n as f64))
        .collect();
    let infl = kde_inflections(&x, None).unwrap();
    assert_eq!(infl.len(), 2, "{infl:?}");
    assert!((infl[0] - 1.0).abs() < 0.2, "{infl:?}");
    assert!((infl[1] - 5.0).abs() < 0.2, "{infl:?}");
}

#[test]
fn kde_bimodal_has_at_least_four_inflections() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = normals(&mut rng, 200, 0.0, 1.0);
    x.extend(normals(&mut rng, 200, 8.0, 1.0));
    assert!(kde_inflections(&x, None).unwrap().len() >= 4);
}

#[test]
fn kde_inflections_shift_with_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = normals(&mut rng, 100, 0.0, 1.0);
    let shifted: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
    let a = kde_inflections(&x, None).unwrap();
    let b = kde_inflections(&shifted, None).unwrap();
    assert_eq!(a.len(), b.len());
    for (p, q) in a.iter().zip(&b) {
        assert!((q - p - 10.0).abs() < 1e-9);
    }
}

#[test]
fn kde_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = normals(&mut rng, 300, 0.0, 1.0);
    let k = kde(&x, None).unwrap();
    let step = k.grid[1] - k.grid[0];
    let total: f64 = k.density.iter().sum::<f64>() * step;
    assert!((total - 1.0).abs() < 1e-3);
}

#[test]
fn gmm_prefers_one_component_for_a_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fit = gmm2_bic(&normals(&mut rng, 500, 0.0, 1.0), 3).unwrap();
    assert!(fit.bic1 < fit.bic2);
    assert_eq!(fit.crossover, None);
}

#[test]
fn gmm_finds_mixture_crossover() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = Vec::new();
    for _ in 0..500 {
        let mu = if rng.random::<bool>() { 0.0 } else { 4.0 };
        x.push(mu + 0.5 * Normal::new(0.0, 1.0).unwrap().sample(&mut rng));
    }
    let fit = gmm2_bic(&x, 3).unwrap();
    assert!(fit.bic2 < fit.bic1);
    let c = fit.crossover.unwrap();
    assert!(c > 1.5 && c < 2.5, "crossover {c}");

    let mut reversed = x.clone();
    reversed.reverse();
    let c2 = gmm2_bic(&reversed, 11).unwrap().crossover.unwrap();
    assert!((c - c2).abs() < 1e-4);
}

/// Optimal partitioning without pruning.
fn optimal_partition(x: &[f64], beta: f64) -> Vec<usize> {
    let n = x.len();
    let cost = |s: usize, t: usize| {
        let seg = &x[s..t];
        let m = seg.iter().sum::<f64>() / seg.len() as f64;
        seg.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };
    let mut f = vec![0.0; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -beta;
    for t in 1..=n {
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for s in 0..t {
            let v = f[s] + cost(s, t) + beta;
            if best.is_infinite() || v < best - 1e-9 * (1.0 + best.abs()) {
                best = v;
                arg = s;
            }
        }
        f[t] = best;
        last[t] = arg;
    }
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        if last[t] > 0 {
            cps.push(last[t]);
        }
        t = last[t];
    }
    cps.reverse();
    cps
}

#[test]
fn pelt_matches_optimal_partitioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in 4..=60 {
        for rep in 0..3 {
            let mut x = Vec::with_capacity(n);
            let mut level = 0.0;
            for _ in 0..n {
                if rng.random::<f64>() < 0.08 {
                    level += rng.random_range(-3.0..3.0);
                }
                x.push(level + 0.5 * rng.random_range(-1.0..1.0));
            }
            let beta = if rep == 2 { 0.3 } else { overlap_stats::default_penalty(&x) };
            assert_eq!(
                pelt(&x, Some(beta)).unwrap(),
                optimal_partition(&x, beta),
                "n={n} rep={rep} x={x:?} beta={beta}"
            );
        }
    }
}

#[test]
fn pelt_single_step_matches_best_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut x = normals(&mut rng, 50, 0.0, 0.1);
    x.extend(normals(&mut rng, 50, 5.0, 0.1));
    let cps = pelt(&x, None).unwrap();
    assert_eq!(cps.len(), 1);
    let c = MeanShiftCost::new(&x);
    let best = (1..x.len())
        .min_by(|&a, &b| (c.cost(0, a) + c.cost(a, 100)).total_cmp(&(c.cost(0, b) + c.cost(b, 100))))
        .unwrap();
    assert_eq!(cps[0], best);
    assert!((cps[0] as i64 - 50).abs() <= 1);
}

#[test]
fn tost_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = normals(&mut rng, 200, 0.0, 1.0);
    assert!(tost(&a, &a, 0.2, 0.05).unwrap().equivalent);

    let b = normals(&mut rng, 200, 0.5, 1.0);
    assert!(!tost(&a, &b, 0.2, 0.05).unwrap().equivalent);

    // d lands exactly on the margin
    let x = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
    let sd = 0.8f64.sqrt();
    let y: Vec<f64> = x.iter().map(|v| v - 0.2 * sd).collect();
    let r = tost(&y, &x, 0.2, 0.05).unwrap();
    assert!((r.d + 0.2).abs() < 1e-12);
    assert!(!r.equivalent);
}

#[test]
fn tost_never_equivalent_far_outside_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..500 {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let a = normals(&mut rng, 200, 0.0, 1.0);
        let b = normals(&mut rng, 200, sign * 0.5, 1.0);
        assert!(!tost(&a, &b, 0.2, 0.05).unwrap().equivalent);
    }
}

#[test]
fn tost_interval_matches_one_sided_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let a = normals(&mut rng, 30, 0.0, 1.0);
        let shift = rng.random_range(-0.3..0.3);
        let b = normals(&mut rng, 40, shift, 1.0);
        let r = tost(&a, &b, 0.5, 0.05).unwrap();
        assert_eq!(r.equivalent, r.p_lower < 0.05 && r.p_upper < 0.05);
    }
}

#[test]
fn sample_size_homogeneity() {
    let n1 = tost_sample_size(0.4, 0.8, 0.05).unwrap().formula as f64;
    let n2 = tost_sample_size(0.2, 0.8, 0.05).unwrap().formula as f64;
    assert!((n2 - 4.0 * n1).abs() <= 4.0);
}

#[test]
fn pearson_matches_covariance_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let a = normals(&mut rng, 25, 0.0, 1.0);
        let b: Vec<f64> = a.iter().map(|v| 0.3 * v + rng.random::<f64>()).collect();
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n - ma * mb;
        let va = a.iter().map(|x| x * x).sum::<f64>() / n - ma * ma;
        let vb = b.iter().map(|x| x * x).sum::<f64>() / n - mb * mb;
        let oracle = cov / (va * vb).sqrt();
        assert!((pearson(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn dip_ignores_order(mut x in prop::collection::vec(-100.0f64..100.0, 10..60), seed in any::<u64>()) {
        let before = dip_statistic(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..x.len()).rev() {
            let j = rng.random_range(0..=i);
            x.swap(i, j);
        }
        prop_assert_eq!(before, dip_statistic(&x));
    }

    #[test]
    fn etr_bounded_and_scale_free(b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.01f64..1.0, k in 0.1f64..10.0) {
        let r = etr(b, c, d).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((etr(k * b, k * c, k * d).unwrap() - r).abs() < 1e-12);
    }
}
