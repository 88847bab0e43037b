//! Reverse-mode gradients checked against central finite differences.

use overlap_autodiff::{singular_values, svd, Tape, Tensor, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Builds a scalar from the given inputs on a fresh tape.
type Builder = dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>;

fn eval(f: &Builder, inputs: &[Tensor]) -> f64 {
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    f(&tape, &vars).item()
}

/// Largest absolute gap between tape gradients and central differences.
fn max_fd_error(f: &Builder, inputs: &[Tensor]) -> f64 {
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&tape, &vars);
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt_or_zeros(vars[k]);
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += H;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(f, &plus) - eval(f, &minus)) / (2.0 * H);
            worst = worst.max((numeric - analytic[i]).abs());
        }
    }
    worst
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[4, 2]);
    let f: &Builder = &|t, v| t.matmul(v[0], v[1]).unwrap().square().sum();
    assert!(max_fd_error(f, &[a, b]) < 1e-6);
}

#[test]
fn silu_values_and_gradient() {
    let tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![0.0]));
    assert_eq!(x.silu().item(), 0.0);

    let f: &Builder = &|_, v| v[0].silu().sum();
    assert!(max_fd_error(f, &[Tensor::vector(vec![1.0])]) < 1e-6);
}

#[test]
fn sum_of_zeros_is_zero() {
    let tape = Tape::new();
    let z = tape.constant(Tensor::zeros(&[3, 5]));
    assert_eq!(z.sum().item(), 0.0);
}

#[test]
fn shared_subexpression_accumulates() {
    let tape = Tape::new();
    let x = tape.param(Tensor::scalar(3.0));
    let y = x.add(x).unwrap();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.wrt(x).unwrap(), &[2.0]);

    // x appears on three paths: x*x + x
    let tape = Tape::new();
    let x = tape.param(Tensor::scalar(1.5));
    let y = x.mul(x).unwrap().add(x).unwrap();
    let g = tape.backward(y).unwrap();
    assert!((g.wrt(x).unwrap()[0] - 4.0).abs() < 1e-15);
}

#[test]
fn constants_receive_no_gradient() {
    let tape = Tape::new();
    let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
    let p = tape.param(Tensor::vector(vec![3.0, 4.0]));
    let out = c.mul(p).unwrap().sum();
    let g = tape.backward(out).unwrap();
    assert!(g.wrt(c).is_none());
    assert_eq!(g.wrt(p).unwrap(), &[1.0, 2.0]);
}

#[test]
fn backward_needs_scalar() {
    let tape = Tape::new();
    let p = tape.param(Tensor::vector(vec![3.0, 4.0]));
    assert!(tape.backward(p).is_err());
}

#[test]
fn elementwise_shape_mismatch() {
    let tape = Tape::new();
    let a = tape.param(Tensor::zeros(&[2, 2]));
    let b = tape.param(Tensor::zeros(&[4]));
    assert!(a.add(b).is_err());
    assert!(a.mul(b).is_err());
    assert!(tape.concat(a, b).is_err());
}

/// Every differentiable op in one table, each reduced to a scalar by a
/// weighted sum so no gradient entry is trivially symmetric.
fn op_table() -> Vec<(&'static str, Vec<Vec<usize>>, Box<Builder>)> {
    fn weighted<'t>(t: &'t Tape, v: Var<'t>) -> Var<'t> {
        let n = v.value().len();
        let w: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * i as f64).collect();
        t.mul_const(v, w).unwrap().sum()
    }
    vec![
        (
            "matmul",
            vec![vec![3, 4], vec![4, 2]],
            Box::new(|t: &Tape, v: &[Var]| weighted(t, t.matmul(v[0], v[1]).unwrap())),
        ),
        (
            "affine",
            vec![vec![3, 4], vec![4, 2], vec![2]],
            Box::new(|t, v| weighted(t, t.affine(v[0], v[1], v[2]).unwrap())),
        ),
        (
            "add",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|t, v| weighted(t, t.add(v[0], v[1]).unwrap())),
        ),
        (
            "sub",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|t, v| weighted(t, t.sub(v[0], v[1]).unwrap())),
        ),
        (
            "mul",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|t, v| weighted(t, t.mul(v[0], v[1]).unwrap())),
        ),
        (
            "add_scaled",
            vec![vec![5], vec![5]],
            Box::new(|t, v| weighted(t, t.add_scaled(v[0], v[1], -0.7).unwrap())),
        ),
        (
            "scale",
            vec![vec![4]],
            Box::new(|t, v| weighted(t, t.scale(v[0], 2.5))),
        ),
        (
            "silu",
            vec![vec![2, 4]],
            Box::new(|t, v| weighted(t, t.silu(v[0]))),
        ),
        (
            "square",
            vec![vec![6]],
            Box::new(|t, v| weighted(t, t.square(v[0]))),
        ),
        (
            "mean",
            vec![vec![6]],
            Box::new(|t, v| t.mean(t.square(v[0]))),
        ),
        (
            "concat",
            vec![vec![3, 2], vec![3, 4]],
            Box::new(|t, v| weighted(t, t.concat(v[0], v[1]).unwrap())),
        ),
        (
            "outer",
            vec![vec![2, 3], vec![2, 4]],
            Box::new(|t, v| weighted(t, t.outer(v[0], v[1]).unwrap())),
        ),
        (
            "transpose",
            vec![vec![3, 2]],
            Box::new(|t, v| weighted(t, t.transpose(v[0]).unwrap())),
        ),
        (
            "reshape",
            vec![vec![3, 2]],
            Box::new(|t, v| weighted(t, t.reshape(v[0], vec![6]).unwrap())),
        ),
        (
            "pair_distances",
            vec![vec![4, 3]],
            Box::new(|t, v| {
                let d = t
                    .pair_distances(v[0], vec![(0, 1), (2, 3), (1, 3), (0, 2)])
                    .unwrap();
                weighted(t, t.square(d))
            }),
        ),
        (
            "bce_with_logits",
            vec![vec![5]],
            Box::new(|t, v| {
                t.bce_with_logits(v[0], vec![1.0, 0.0, 1.0, 0.3, 0.0])
                    .unwrap()
            }),
        ),
        (
            "row_normalize",
            vec![vec![3, 4]],
            Box::new(|t, v| weighted(t, t.row_normalize(v[0]).unwrap())),
        ),
        (
            "log_softmax_rows",
            vec![vec![3, 4]],
            Box::new(|t, v| weighted(t, t.log_softmax_rows(v[0]).unwrap())),
        ),
    ]
}

#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, shapes, f) in op_table() {
        for _ in 0..5 {
            let inputs: Vec<_> = shapes.iter().map(|s| random(&mut rng, s)).collect();
            let err = max_fd_error(f.as_ref(), &inputs);
            assert!(err < 1e-5, "{name}: max abs error {err}");
        }
    }
}

#[test]
fn svd_reconstructs_random_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let m = random(&mut rng, &[4, 4]);
        let d = svd(&m).unwrap();
        let mut us = d.u.clone();
        for r in 0..4 {
            for c in 0..4 {
                us.data_mut()[r * 4 + c] *= d.s[c];
            }
        }
        let rec = us.matmul(&d.v.transpose()).unwrap();
        let err: f64 = rec
            .data()
            .iter()
            .zip(m.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "reconstruction error {err}");
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(d.s.iter().all(|&s| s >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singular_values_invariant_under_transpose(
        rows in 1usize..7,
        cols in 1usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random(&mut rng, &[rows, cols]);
        let a = singular_values(&m).unwrap();
        let b = singular_values(&m.transpose()).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn u_and_v_are_orthonormal(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random(&mut rng, &[rows, cols]);
        let d = svd(&m).unwrap();
        for q in [&d.u, &d.v] {
            let gram = q.transpose().matmul(q).unwrap();
            let k = gram.rows();
            for i in 0..k {
                for j in 0..k {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram.get(i, j) - target).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn affine_silu_chain_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = vec![
            random(&mut rng, &[2, 3]),
            random(&mut rng, &[3, 3]),
            random(&mut rng, &[3]),
        ];
        let f: &Builder = &|t, v| {
            let h = t.silu(t.affine(v[0], v[1], v[2]).unwrap());
            let h2 = t.silu(t.affine(h, v[1], v[2]).unwrap());
            t.square(h2).sum()
        };
        prop_assert!(max_fd_error(f, &inputs) < 1e-5);
    }
}
