use overlap_autodiff::{Tape, Tensor};
use overlap_net::*;
use overlap_topo::{rips_persistence, PointCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_config(entangle: EntangleMode) -> ModelConfig {
    ModelConfig {
        d1: 3,
        d2: 2,
        latent: 4,
        hidden: 5,
        entangle,
        allow_low_rank: false,
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for b in &q {
            let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

#[test]
fn identity_kernel_flattens_the_outer_product() {
    let cfg = ModelConfig {
        d1: 2,
        d2: 2,
        latent: 4,
        hidden: 3,
        entangle: EntangleMode::Full,
        allow_low_rank: false,
    };
    let mut tensors = ModelParams::init(cfg, 0).unwrap().tensors().to_vec();
    tensors[0] = Tensor::identity(4);
    let params = ModelParams::from_tensors(cfg, tensors).unwrap();
    let tape = Tape::new();
    let mv = params.on_tape(&tape, false);
    let x = tape.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
    let y = tape.constant(Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap());
    assert_eq!(mv.entangle(x, y).unwrap().value().data(), &[0.0, 1.0, 0.0, 0.0]);
}

#[test]
fn zero_x_gives_zero_state() {
    for mode in [EntangleMode::Full, EntangleMode::Tucker { rank: 4 }] {
        let params = ModelParams::init(small_config(mode), 3).unwrap();
        let tape = Tape::new();
        let mv = params.on_tape(&tape, false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = tape.constant(Tensor::zeros(&[5, 3]));
        let y = tape.constant(gaussian_matrix(&mut rng, 5, 2));
        assert!(mv.entangle(x, y).unwrap().value().data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn entangle_rejects_mismatched_inputs() {
    let params = ModelParams::init(small_config(EntangleMode::Full), 0).unwrap();
    let tape = Tape::new();
    let mv = params.on_tape(&tape, false);
    let x = tape.constant(Tensor::zeros(&[2, 2]));
    let y = tape.constant(Tensor::zeros(&[2, 2]));
    assert!(matches!(mv.entangle(x, y), Err(NetError::Dimension(_))));
}

#[test]
fn full_and_exact_rank_tucker_agree() {
    let (d1, d2) = (3, 2);
    let r = d1 * d2;
    let full = ModelParams::init(small_config(EntangleMode::Full), 7).unwrap();
    let w = full.tensors()[0].clone();
    let mut u = vec![0.0; d1 * r];
    let mut v = vec![0.0; d2 * r];
    for k in 0..r {
        u[(k / d2) * r + k] = 1.0;
        v[(k % d2) * r + k] = 1.0;
    }
    let mut tensors = vec![
        Tensor::matrix(d1, r, u).unwrap(),
        Tensor::matrix(d2, r, v).unwrap(),
        w,
    ];
    tensors.extend(full.tensors()[1..].iter().cloned());
    let tucker = ModelParams::from_tensors(small_config(EntangleMode::Tucker { rank: r }), tensors).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = gaussian_matrix(&mut rng, 8, d1);
    let y = gaussian_matrix(&mut rng, 8, d2);
    let grid = uniform_grid(1.0, 5);
    let a = full.embed(&x, &y, &grid, Solver::Rk4).unwrap();
    let b = tucker.embed(&x, &y, &grid, Solver::Rk4).unwrap();
    for (p, q) in a.z0.data().iter().zip(b.z0.data()) {
        assert!((p - q).abs() < 1e-10);
    }
    for (p, q) in a.logits.iter().zip(&b.logits) {
        assert!((p - q).abs() < 1e-10);
    }
}

#[test]
fn tucker_rank_guard() {
    let low = ModelConfig {
        d1: 8,
        d2: 8,
        entangle: EntangleMode::Tucker { rank: 15 },
        ..small_config(EntangleMode::Full)
    };
    assert_eq!(tucker_min_rank(8, 8), 16);
    assert!(low.validate().is_err());
    assert!(ModelConfig { allow_low_rank: true, ..low }.validate().is_ok());
}

fn decay(tape: &Tape, grid: &[f64], solver: Solver) -> (f64, usize) {
    let z0 = tape.constant(Tensor::matrix(1, 1, vec![1.0]).unwrap());
    let sol = integrate(tape, z0, grid, solver, |z, _| Ok(z.scale(-1.0))).unwrap();
    (sol.last().item(), sol.evaluations)
}

#[test]
fn rk4_reproduces_exponential_decay() {
    let tape = Tape::new();
    let (zt, _) = decay(&tape, &uniform_grid(1.0, 21), Solver::Rk4);
    assert!((zt - (-1f64).exp()).abs() < 1e-6);
}

#[test]
fn rk4_observed_order() {
    let steps = [4usize, 8, 16, 32];
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&n| {
            let tape = Tape::new();
            let (zt, _) = decay(&tape, &uniform_grid(1.0, n + 1), Solver::Rk4);
            ((1.0 / n as f64).ln(), (zt - (-1f64).exp()).abs().ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope >= 3.7, "order {slope}");
    // halving h divides the error by about 16
    for w in pts.windows(2) {
        let ratio = (w[0].1 - w[1].1).exp();
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn dopri_matches_rk4_with_fewer_evaluations() {
    let tape = Tape::new();
    let (rk, rk_evals) = decay(&tape, &uniform_grid(1.0, 20), Solver::Rk4);
    let (dp, dp_evals) = decay(&tape, &[0.0, 1.0], Solver::Dopri);
    assert!((rk - dp).abs() < 1e-5);
    assert!((dp - (-1f64).exp()).abs() < 1e-5);
    assert!(dp_evals < rk_evals, "{dp_evals} vs {rk_evals}");
}

#[test]
fn gradients_flow_through_the_solver() {
    // z' = -k z, z(1) = e^{-k}; d z(1)/dk = -e^{-k} at k = 1
    let tape = Tape::new();
    let k = tape.param(Tensor::matrix(1, 1, vec![1.0]).unwrap());
    let z0 = tape.constant(Tensor::matrix(1, 1, vec![1.0]).unwrap());
    let sol = integrate(&tape, z0, &uniform_grid(1.0, 41), Solver::Rk4, |z, _| {
        Ok(tape.scale(tape.mul(z, k)?, -1.0))
    })
    .unwrap();
    let g = tape.backward(sol.last().sum()).unwrap().wrt_or_zeros(k);
    assert!((g[0] + (-1f64).exp()).abs() < 1e-6);
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    Tensor::matrix(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Smallest gap between distinct pairwise distances.
fn min_tie_gap(points: &Tensor) -> f64 {
    let n = points.rows();
    let mut d = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn loss_at(points: &Tensor, cfg: &TopoLossConfig) -> f64 {
    let pc = PointCloud::new(points.rows(), points.cols(), points.data().to_vec()).unwrap();
    topo_loss_value(&rips_persistence(&pc, cfg.max_dim, None).unwrap(), cfg)
}

#[test]
fn topo_loss_gradient_matches_finite_differences() {
    let cfg = TopoLossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 30 {
        let pts = random_cloud(&mut rng, 16, 2);
        if min_tie_gap(&pts) < 1e-5 {
            continue;
        }
        let grad = tape_gradient(&pts, &cfg).unwrap();
        let h = 1e-7;
        let mut max_err: f64 = 0.0;
        for k in 0..pts.len() {
            let mut up = pts.clone();
            up.data_mut()[k] += h;
            let mut down = pts.clone();
            down.data_mut()[k] -= h;
            let fd = (loss_at(&up, &cfg) - loss_at(&down, &cfg)) / (2.0 * h);
            max_err = max_err.max((fd - grad[k]).abs());
        }
        assert!(max_err < 1e-3, "cloud {checked}: {max_err}");
        assert!(dual_gradient_distance(&pts, &cfg).unwrap() < 1e-3);
        checked += 1;
    }
}

#[test]
fn tape_loss_matches_diagram_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for max_dim in [1, 2] {
        let cfg = TopoLossConfig { max_dim, lambda: 0.7, ..TopoLossConfig::default() };
        let pts = random_cloud(&mut rng, 12, 3);
        let tape = Tape::new();
        let tl = topo_loss(tape.constant(pts.clone()), &cfg).unwrap();
        assert!((tl.loss.item() - loss_at(&pts, &cfg)).abs() < 1e-12);
    }
}

#[test]
fn tight_cluster_has_no_loop_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts = Tensor::matrix(6, 3, (0..18).map(|_| 1e-2 * rng.random::<f64>()).collect()).unwrap();
    let tape = Tape::new();
    let tl = topo_loss(tape.constant(pts), &TopoLossConfig::default()).unwrap();
    assert!(tl.loss.item() > 0.0);
    assert!((tl.loss.item() - tl.beta0_sq).abs() < 1e-15);
}

#[test]
fn circle_loss_decreases_in_lambda() {
    let n = 64;
    let pts: Vec<f64> = (0..n)
        .flat_map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let pts = Tensor::matrix(n, 2, pts).unwrap();
    let losses: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&lambda| loss_at(&pts, &TopoLossConfig { lambda, ..TopoLossConfig::default() }))
        .collect();
    let tape = Tape::new();
    let tl = topo_loss(tape.constant(pts), &TopoLossConfig::default()).unwrap();
    assert!(tl.higher_sq > tl.beta0_sq);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn total_loss_gradient_reaches_both_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts = random_cloud(&mut rng, 10, 2);
    let target: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
    let w = Tensor::matrix(2, 1, vec![0.4, -0.3]).unwrap();
    let cfg = TopoLossConfig::default();
    let alpha = 0.1;
    let eval = |p: &Tensor| -> f64 {
        let tape = Tape::new();
        let z = tape.constant(p.clone());
        let task = tape.bce_with_logits(tape.matmul(z, tape.constant(w.clone())).unwrap(), target.clone()).unwrap();
        total_loss(task, alpha, || Ok(topo_loss(z, &cfg)?.loss)).unwrap().item()
    };
    let tape = Tape::new();
    let z = tape.param(pts.clone());
    let task = tape.bce_with_logits(tape.matmul(z, tape.constant(w.clone())).unwrap(), target.clone()).unwrap();
    let total = total_loss(task, alpha, || Ok(topo_loss(z, &cfg)?.loss)).unwrap();
    let grad = tape.backward(total).unwrap().wrt_or_zeros(z);
    let h = 1e-6;
    for k in 0..pts.len() {
        let mut up = pts.clone();
        up.data_mut()[k] += h;
        let mut down = pts.clone();
        down.data_mut()[k] -= h;
        let fd = (eval(&up) - eval(&down)) / (2.0 * h);
        assert!((fd - grad[k]).abs() < 1e-6, "{k}: {fd} vs {}", grad[k]);
    }
}

#[test]
fn descent_step_shrinks_component_persistence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut data = Vec::new();
    for c in [0.0, 3.0] {
        for _ in 0..10 {
            data.push(c + 0.3 * rng.random::<f64>());
            data.push(0.3 * rng.random::<f64>());
        }
    }
    let pts = Tensor::matrix(20, 2, data).unwrap();
    let cfg = TopoLossConfig::default();
    let alpha = 0.1;
    let tape = Tape::new();
    let before = topo_loss(tape.constant(pts.clone()), &cfg).unwrap().beta0_sq;
    let grad = tape_gradient(&pts, &cfg).unwrap();
    let mut next = pts.clone();
    next.data_mut().iter_mut().zip(&grad).for_each(|(p, g)| *p -= 0.05 * alpha * g);
    let after = topo_loss(tape.constant(next), &cfg).unwrap().beta0_sq;
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn tension_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = random_cloud(&mut rng, 20, 2);
    let (t0, _) = tension_of(&pts).unwrap();
    let mut scaled = pts.clone();
    scaled.data_mut().iter_mut().for_each(|v| *v *= 7.5);
    let (t1, _) = tension_of(&scaled).unwrap();
    assert!((t0 - t1).abs() < 1e-6 * t0.max(1e-12) + 1e-9);
    let line = Tensor::matrix(5, 1, vec![0.0, 1.0, 2.5, 3.0, 7.0]).unwrap();
    assert_eq!(tension_of(&line).unwrap().0, 0.0);
}

#[test]
fn ns_on_rank_one_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let u: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        assert!(ns_entropy(&z, 8, 12).unwrap().abs() < 1e-10);
    }
}

#[test]
fn ns_maximal_entanglement() {
    for d in [2usize, 4, 8] {
        let z: Vec<f64> = (0..d * d)
            .map(|i| if i % (d + 1) == 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
            .collect();
        assert!((ns_entropy(&z, d, d).unwrap() - (d as f64).ln()).abs() < 1e-9);
    }
}

#[test]
fn ns_gauge_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (d1, d2) = (4, 6);
    let m: Vec<Vec<f64>> = (0..d1).map(|_| (0..d2).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let base = ns_entropy(&m.concat(), d1, d2).unwrap();
    for _ in 0..50 {
        let p = random_orthogonal(&mut rng, d1);
        let q = random_orthogonal(&mut rng, d2);
        let rotated = matmul(&matmul(&p, &m), &q);
        assert!((ns_entropy(&rotated.concat(), d1, d2).unwrap() - base).abs() < 1e-9);
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn ns_matches_gram_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let m: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let mt: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| m[i][j]).collect()).collect();
        let ev = symmetric_eigenvalues(matmul(&m, &mt));
        let total: f64 = ev.iter().sum();
        let oracle: f64 = -ev.iter().map(|e| e / total).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        assert!((ns_entropy(&m.concat(), 4, 4).unwrap() - oracle).abs() < 1e-10);
    }
}

#[test]
fn ns_zero_iff_rank_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let u: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let mut z: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        z.iter_mut().enumerate().for_each(|(i, val)| *val += 1e-3 * w[i / 3] * w[i % 3].powi(2));
        let sv = schmidt_weights(&z, 3, 3).unwrap();
        let ns = ns_entropy(&z, 3, 3).unwrap();
        assert_eq!(ns < 1e-10, sv[1].sqrt() < 1e-10);
    }
}

proptest! {
    #[test]
    fn ns_bounds(z in prop::collection::vec(-5.0f64..5.0, 12)) {
        prop_assume!(z.iter().any(|v| v.abs() > 1e-6));
        let ns = ns_entropy(&z, 3, 4).unwrap();
        prop_assert!(ns >= -1e-12 && ns <= 3f64.ln() + 1e-12);
    }

    #[test]
    fn health_flags_follow_the_median_rule(norms in prop::collection::vec(0.01f64..100.0, 1..300)) {
        let log = gradient_health(&norms);
        for (i, &n) in norms.iter().enumerate() {
            let lo = i.saturating_sub(HEALTH_WINDOW);
            let expected = if i == 0 {
                false
            } else {
                let mut w = norms[lo..i].to_vec();
                w.sort_by(f64::total_cmp);
                let m = if w.len() % 2 == 1 { w[w.len() / 2] } else { 0.5 * (w[w.len() / 2 - 1] + w[w.len() / 2]) };
                n > SPIKE_FACTOR * m
            };
            prop_assert_eq!(log.flags[i], expected);
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("model");
    let params = ModelParams::init(small_config(EntangleMode::Full), 42).unwrap();
    let (bin, json) = params.save(&stem, 42, "abc").unwrap();
    assert_eq!(std::fs::metadata(&bin).unwrap().len() as usize, params.param_count() * 8);
    let (loaded, meta) = ModelParams::load(&stem).unwrap();
    assert_eq!(loaded, params);
    assert_eq!(meta.seed, 42);
    assert_eq!(meta.config_hash, "abc");
    assert_eq!(meta.names[0], "entangle.w");

    let mut bytes = std::fs::read(&bin).unwrap();
    bytes[3] ^= 1;
    std::fs::write(&bin, bytes).unwrap();
    assert!(matches!(ModelParams::load(&stem), Err(NetError::Format(_))));
    assert!(json.exists());
}

#[test]
fn default_model_is_near_half_a_million_parameters() {
    let cfg = ModelConfig::default();
    let p = ModelParams::init(cfg, 0).unwrap();
    assert_eq!(p.param_count(), cfg.param_count());
    assert!((p.param_count() as f64 - 500_000.0).abs() / 500_000.0 < 0.05);
}
