use std::cell::{Ref, RefCell};

use crate::error::{AutodiffError, Result};
use crate::tensor::{gemm, Tensor};

/// Recorded operation. Inputs are node indices on the same tape, always
/// smaller than the index of the node that records them.
enum Op {
    Leaf,
    MatMul(usize, usize),
    Affine {
        x: usize,
        w: usize,
        b: usize,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddScaled {
        a: usize,
        b: usize,
        scale: f64,
    },
    Scale(usize, f64),
    MulConst(usize, Vec<f64>),
    Silu(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    Concat {
        a: usize,
        b: usize,
        a_cols: usize,
        b_cols: usize,
    },
    Outer {
        x: usize,
        y: usize,
    },
    Transpose(usize),
    Reshape(usize),
    PairDistances {
        x: usize,
        pairs: Vec<(usize, usize)>,
    },
    BceWithLogits {
        logits: usize,
        targets: Vec<f64>,
    },
    RowNormalize(usize),
    LogSoftmaxRows(usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward pass.
///
/// Nodes are stored in creation order, which is a topological order of the
/// computation graph, so the backward sweep simply walks the node list in
/// reverse. A tape is single-threaded and meant to be dropped after one
/// backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

/// Gradients of a scalar output with respect to every node that required one.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, var: Var<'_>) -> Option<&[f64]> {
        self.grads.get(var.id).and_then(|g| g.as_deref())
    }

    /// Gradient for `var`, or zeros of the right length if it was unreachable.
    pub fn wrt_or_zeros(&self, var: Var<'_>) -> Vec<f64> {
        match self.wrt(var) {
            Some(g) => g.to_vec(),
            None => vec![0.0; var.value().len()],
        }
    }
}

fn dim_err(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::Dimension {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Trainable leaf: gradients are accumulated into it.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives gradients (inputs, targets, masks).
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var<'_>) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[var.id].value)
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn unary(&self, a: Var<'_>, f: impl FnOnce(&Tensor) -> Tensor, op: Op) -> Var<'_> {
        let value = f(&self.value(a));
        let rg = self.requires(&[a.id]);
        self.push(value, op, rg)
    }

    pub fn matmul(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            av.matmul(&bv)?
        };
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(value, Op::MatMul(a.id, b.id), rg))
    }

    /// `x·w + b` with `x: [m,k]`, `w: [k,n]`, `b: [n]`.
    pub fn affine(&self, x: Var<'_>, w: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let value = {
            let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
            let mut out = xv.matmul(&wv)?;
            let n = wv.cols();
            if bv.len() != n {
                return Err(dim_err("affine", &wv, &bv));
            }
            for row in out.data_mut().chunks_mut(n) {
                for (o, bias) in row.iter_mut().zip(bv.data()) {
                    *o += bias;
                }
            }
            out
        };
        let rg = self.requires(&[x.id, w.id, b.id]);
        Ok(self.push(
            value,
            Op::Affine {
                x: x.id,
                w: w.id,
                b: b.id,
            },
            rg,
        ))
    }

    fn zip_with(
        &self,
        name: &'static str,
        a: Var<'_>,
        b: Var<'_>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err(name, &av, &bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let value = self.zip_with("add", a, b, |x, y| x + y)?;
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(value, Op::Add(a.id, b.id), rg))
    }

    pub fn sub(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let value = self.zip_with("sub", a, b, |x, y| x - y)?;
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(value, Op::Sub(a.id, b.id), rg))
    }

    pub fn mul(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let value = self.zip_with("mul", a, b, |x, y| x * y)?;
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(value, Op::Mul(a.id, b.id), rg))
    }

    /// `a + scale * b`, the building block of Runge-Kutta stage updates.
    pub fn add_scaled(&self, a: Var<'_>, b: Var<'_>, scale: f64) -> Result<Var<'_>> {
        let value = self.zip_with("add_scaled", a, b, |x, y| x + scale * y)?;
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(
            value,
            Op::AddScaled {
                a: a.id,
                b: b.id,
                scale,
            },
            rg,
        ))
    }

    pub fn scale(&self, a: Var<'_>, s: f64) -> Var<'_> {
        self.unary(
            a,
            |t| Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect()).unwrap(),
            Op::Scale(a.id, s),
        )
    }

    /// Elementwise product with a constant array of the same length.
    pub fn mul_const(&self, a: Var<'_>, c: Vec<f64>) -> Result<Var<'_>> {
        let value = {
            let av = self.value(a);
            if av.len() != c.len() {
                return Err(AutodiffError::Dimension {
                    op: "mul_const",
                    lhs: av.shape().to_vec(),
                    rhs: vec![c.len()],
                });
            }
            let data = av.data().iter().zip(&c).map(|(x, y)| x * y).collect();
            Tensor::new(av.shape().to_vec(), data)?
        };
        let rg = self.requires(&[a.id]);
        Ok(self.push(value, Op::MulConst(a.id, c), rg))
    }

    pub fn silu(&self, a: Var<'_>) -> Var<'_> {
        self.unary(
            a,
            |t| {
                let data = t.data().iter().map(|&x| x * sigmoid(x)).collect();
                Tensor::new(t.shape().to_vec(), data).unwrap()
            },
            Op::Silu(a.id),
        )
    }

    pub fn square(&self, a: Var<'_>) -> Var<'_> {
        self.unary(
            a,
            |t| Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * x).collect()).unwrap(),
            Op::Square(a.id),
        )
    }

    pub fn sum(&self, a: Var<'_>) -> Var<'_> {
        self.unary(a, |t| Tensor::scalar(t.data().iter().sum()), Op::Sum(a.id))
    }

    pub fn mean(&self, a: Var<'_>) -> Var<'_> {
        self.unary(
            a,
            |t| Tensor::scalar(t.data().iter().sum::<f64>() / t.len().max(1) as f64),
            Op::Mean(a.id),
        )
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        let (value, a_cols, b_cols) = {
            let (av, bv) = (self.value(a), self.value(b));
            if av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows() {
                return Err(dim_err("concat", &av, &bv));
            }
            let (ac, bc) = (av.cols(), bv.cols());
            let mut data = Vec::with_capacity(av.len() + bv.len());
            for r in 0..av.rows() {
                data.extend_from_slice(av.row(r));
                data.extend_from_slice(bv.row(r));
            }
            (Tensor::matrix(av.rows(), ac + bc, data)?, ac, bc)
        };
        let rg = self.requires(&[a.id, b.id]);
        Ok(self.push(
            value,
            Op::Concat {
                a: a.id,
                b: b.id,
                a_cols,
                b_cols,
            },
            rg,
        ))
    }

    /// Row-wise outer product: `[m,p] × [m,q] → [m, p·q]`, row-major within
    /// each row (`out[r, i*q + j] = x[r,i] * y[r,j]`).
    pub fn outer(&self, x: Var<'_>, y: Var<'_>) -> Result<Var<'_>> {
        let value = {
            let (xv, yv) = (self.value(x), self.value(y));
            if xv.rank() != 2 || yv.rank() != 2 || xv.rows() != yv.rows() {
                return Err(dim_err("outer", &xv, &yv));
            }
            let (m, p, q) = (xv.rows(), xv.cols(), yv.cols());
            let mut data = Vec::with_capacity(m * p * q);
            for r in 0..m {
                let yr = yv.row(r);
                for &xi in xv.row(r) {
                    data.extend(yr.iter().map(|yj| xi * yj));
                }
            }
            Tensor::matrix(m, p * q, data)?
        };
        let rg = self.requires(&[x.id, y.id]);
        Ok(self.push(value, Op::Outer { x: x.id, y: y.id }, rg))
    }

    pub fn transpose(&self, a: Var<'_>) -> Result<Var<'_>> {
        if self.value(a).rank() != 2 {
            return Err(AutodiffError::Invalid("transpose needs a matrix".into()));
        }
        Ok(self.unary(a, Tensor::transpose, Op::Transpose(a.id)))
    }

    pub fn reshape(&self, a: Var<'_>, shape: Vec<usize>) -> Result<Var<'_>> {
        let value = self.value(a).clone().reshape(shape)?;
        let rg = self.requires(&[a.id]);
        Ok(self.push(value, Op::Reshape(a.id), rg))
    }

    /// Euclidean distances between selected row pairs of a point matrix.
    pub fn pair_distances(&self, x: Var<'_>, pairs: Vec<(usize, usize)>) -> Result<Var<'_>> {
        let value = {
            let xv = self.value(x);
            if xv.rank() != 2 {
                return Err(AutodiffError::Invalid("pair_distances needs a matrix".into()));
            }
            let n = xv.rows();
            let mut out = Vec::with_capacity(pairs.len());
            for &(p, q) in &pairs {
                if p >= n || q >= n {
                    return Err(AutodiffError::Invalid(format!(
                        "pair ({p},{q}) out of range for {n} points"
                    )));
                }
                let d2: f64 = xv
                    .row(p)
                    .iter()
                    .zip(xv.row(q))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                out.push(d2.sqrt());
            }
            Tensor::vector(out)
        };
        let rg = self.requires(&[x.id]);
        Ok(self.push(value, Op::PairDistances { x: x.id, pairs }, rg))
    }

    /// Mean binary cross-entropy of logits against targets in `[0, 1]`.
    pub fn bce_with_logits(&self, logits: Var<'_>, targets: Vec<f64>) -> Result<Var<'_>> {
        let value = {
            let lv = self.value(logits);
            if lv.len() != targets.len() {
                return Err(AutodiffError::Dimension {
                    op: "bce_with_logits",
                    lhs: lv.shape().to_vec(),
                    rhs: vec![targets.len()],
                });
            }
            let total: f64 = lv
                .data()
                .iter()
                .zip(&targets)
                .map(|(&l, &t)| l.max(0.0) - l * t + (-l.abs()).exp().ln_1p())
                .sum();
            Tensor::scalar(total / targets.len().max(1) as f64)
        };
        let rg = self.requires(&[logits.id]);
        Ok(self.push(
            value,
            Op::BceWithLogits {
                logits: logits.id,
                targets,
            },
            rg,
        ))
    }

    /// Scales each row to unit Euclidean norm.
    pub fn row_normalize(&self, a: Var<'_>) -> Result<Var<'_>> {
        if self.value(a).rank() != 2 {
            return Err(AutodiffError::Invalid("row_normalize needs a matrix".into()));
        }
        Ok(self.unary(
            a,
            |t| {
                let c = t.cols();
                let mut data = t.data().to_vec();
                for row in data.chunks_mut(c) {
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    row.iter_mut().for_each(|v| *v /= norm);
                }
                Tensor::new(t.shape().to_vec(), data).unwrap()
            },
            Op::RowNormalize(a.id),
        ))
    }

    pub fn log_softmax_rows(&self, a: Var<'_>) -> Result<Var<'_>> {
        if self.value(a).rank() != 2 {
            return Err(AutodiffError::Invalid("log_softmax_rows needs a matrix".into()));
        }
        Ok(self.unary(
            a,
            |t| {
                let c = t.cols();
                let mut data = t.data().to_vec();
                for row in data.chunks_mut(c) {
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    row.iter_mut().for_each(|v| *v -= lse);
                }
                Tensor::new(t.shape().to_vec(), data).unwrap()
            },
            Op::LogSoftmaxRows(a.id),
        ))
    }

    /// Reverse sweep from a scalar output.
    ///
    /// Gradients of shared subexpressions are summed over every use.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let out = &nodes[output.id];
        if out.value.len() != 1 {
            return Err(AutodiffError::NonScalarOutput(out.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[output.id] = Some(vec![1.0]);

        for id in (0..=output.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            backprop_node(&nodes, node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let val = |i: usize| &nodes[i].value;
    let wants = |i: usize| nodes[i].requires_grad;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            if wants(*a) {
                let ga = accumulate(&mut grads[*a], m * k);
                // ga += g · bᵀ
                gemm(m, n, k, 1.0, (g, n, 1), (bv.data(), 1, n), 1.0, (ga, k, 1));
            }
            if wants(*b) {
                let gb = accumulate(&mut grads[*b], k * n);
                // gb += aᵀ · g
                gemm(k, m, n, 1.0, (av.data(), 1, k), (g, n, 1), 1.0, (gb, n, 1));
            }
        }
        Op::Affine { x, w, b } => {
            let (xv, wv) = (val(*x), val(*w));
            let (m, k, n) = (xv.rows(), xv.cols(), wv.cols());
            if wants(*x) {
                let gx = accumulate(&mut grads[*x], m * k);
                gemm(m, n, k, 1.0, (g, n, 1), (wv.data(), 1, n), 1.0, (gx, k, 1));
            }
            if wants(*w) {
                let gw = accumulate(&mut grads[*w], k * n);
                gemm(k, m, n, 1.0, (xv.data(), 1, k), (g, n, 1), 1.0, (gw, n, 1));
            }
            if wants(*b) {
                let gb = accumulate(&mut grads[*b], n);
                for row in g.chunks(n) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
        }
        Op::Add(a, b) => {
            for (i, sign) in [(*a, 1.0), (*b, 1.0)] {
                if wants(i) {
                    axpy(accumulate(&mut grads[i], g.len()), sign, g);
                }
            }
        }
        Op::Sub(a, b) => {
            for (i, sign) in [(*a, 1.0), (*b, -1.0)] {
                if wants(i) {
                    axpy(accumulate(&mut grads[i], g.len()), sign, g);
                }
            }
        }
        Op::Mul(a, b) => {
            if wants(*a) {
                let other = val(*b).data();
                let ga = accumulate(&mut grads[*a], g.len());
                for ((acc, gi), o) in ga.iter_mut().zip(g).zip(other) {
                    *acc += gi * o;
                }
            }
            if wants(*b) {
                let other = val(*a).data();
                let gb = accumulate(&mut grads[*b], g.len());
                for ((acc, gi), o) in gb.iter_mut().zip(g).zip(other) {
                    *acc += gi * o;
                }
            }
        }
        Op::AddScaled { a, b, scale } => {
            if wants(*a) {
                axpy(accumulate(&mut grads[*a], g.len()), 1.0, g);
            }
            if wants(*b) {
                axpy(accumulate(&mut grads[*b], g.len()), *scale, g);
            }
        }
        Op::Scale(a, s) => {
            if wants(*a) {
                axpy(accumulate(&mut grads[*a], g.len()), *s, g);
            }
        }
        Op::MulConst(a, c) => {
            if wants(*a) {
                let ga = accumulate(&mut grads[*a], g.len());
                for ((acc, gi), ci) in ga.iter_mut().zip(g).zip(c) {
                    *acc += gi * ci;
                }
            }
        }
        Op::Silu(a) => {
            if wants(*a) {
                let x = val(*a).data();
                let ga = accumulate(&mut grads[*a], g.len());
                for ((acc, gi), &xi) in ga.iter_mut().zip(g).zip(x) {
                    let s = sigmoid(xi);
                    *acc += gi * s * (1.0 + xi * (1.0 - s));
                }
            }
        }
        Op::Square(a) => {
            if wants(*a) {
                let x = val(*a).data();
                let ga = accumulate(&mut grads[*a], g.len());
                for ((acc, gi), xi) in ga.iter_mut().zip(g).zip(x) {
                    *acc += 2.0 * gi * xi;
                }
            }
        }
        Op::Sum(a) | Op::Mean(a) => {
            if wants(*a) {
                let len = val(*a).len();
                let scale = if matches!(node.op, Op::Mean(_)) {
                    g[0] / len.max(1) as f64
                } else {
                    g[0]
                };
                accumulate(&mut grads[*a], len)
                    .iter_mut()
                    .for_each(|v| *v += scale);
            }
        }
        Op::Concat {
            a,
            b,
            a_cols,
            b_cols,
        } => {
            let width = a_cols + b_cols;
            let rows = g.len() / width;
            if wants(*a) {
                let ga = accumulate(&mut grads[*a], rows * a_cols);
                for r in 0..rows {
                    axpy(
                        &mut ga[r * a_cols..(r + 1) * a_cols],
                        1.0,
                        &g[r * width..r * width + a_cols],
                    );
                }
            }
            if wants(*b) {
                let gb = accumulate(&mut grads[*b], rows * b_cols);
                for r in 0..rows {
                    axpy(
                        &mut gb[r * b_cols..(r + 1) * b_cols],
                        1.0,
                        &g[r * width + a_cols..(r + 1) * width],
                    );
                }
            }
        }
        Op::Outer { x, y } => {
            let (xv, yv) = (val(*x), val(*y));
            let (m, p, q) = (xv.rows(), xv.cols(), yv.cols());
            if wants(*x) {
                let gx = accumulate(&mut grads[*x], m * p);
                for r in 0..m {
                    let yr = yv.row(r);
                    for i in 0..p {
                        let gi = &g[r * p * q + i * q..r * p * q + (i + 1) * q];
                        gx[r * p + i] += gi.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            if wants(*y) {
                let gy = accumulate(&mut grads[*y], m * q);
                for r in 0..m {
                    let xr = xv.row(r);
                    let gyr = &mut gy[r * q..(r + 1) * q];
                    for (i, &xi) in xr.iter().enumerate() {
                        let gi = &g[r * p * q + i * q..r * p * q + (i + 1) * q];
                        axpy(gyr, xi, gi);
                    }
                }
            }
        }
        Op::Transpose(a) => {
            if wants(*a) {
                let (r, c) = (val(*a).rows(), val(*a).cols());
                let ga = accumulate(&mut grads[*a], r * c);
                // g is c×r
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            }
        }
        Op::Reshape(a) => {
            if wants(*a) {
                axpy(accumulate(&mut grads[*a], g.len()), 1.0, g);
            }
        }
        Op::PairDistances { x, pairs } => {
            if wants(*x) {
                let xv = val(*x);
                let d = xv.cols();
                let dist = node.value.data();
                let gx = accumulate(&mut grads[*x], xv.len());
                for (m, &(p, q)) in pairs.iter().enumerate() {
                    if dist[m] <= 0.0 {
                        continue;
                    }
                    let coef = g[m] / dist[m];
                    for k in 0..d {
                        let diff = xv.data()[p * d + k] - xv.data()[q * d + k];
                        gx[p * d + k] += coef * diff;
                        gx[q * d + k] -= coef * diff;
                    }
                }
            }
        }
        Op::BceWithLogits { logits, targets } => {
            if wants(*logits) {
                let lv = val(*logits).data();
                let scale = g[0] / targets.len().max(1) as f64;
                let gl = accumulate(&mut grads[*logits], lv.len());
                for ((acc, &l), &t) in gl.iter_mut().zip(lv).zip(targets) {
                    *acc += scale * (sigmoid(l) - t);
                }
            }
        }
        Op::RowNormalize(a) => {
            if wants(*a) {
                let xv = val(*a);
                let c = xv.cols();
                let y = node.value.data();
                let ga = accumulate(&mut grads[*a], xv.len());
                for r in 0..xv.rows() {
                    let xr = xv.row(r);
                    let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    let yr = &y[r * c..(r + 1) * c];
                    let gr = &g[r * c..(r + 1) * c];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        ga[r * c + k] += (gr[k] - yr[k] * dot) / norm;
                    }
                }
            }
        }
        Op::LogSoftmaxRows(a) => {
            if wants(*a) {
                let c = node.value.cols();
                let y = node.value.data();
                let ga = accumulate(&mut grads[*a], y.len());
                for (r, gr) in g.chunks(c).enumerate() {
                    let total: f64 = gr.iter().sum();
                    for k in 0..c {
                        ga[r * c + k] += gr[k] - y[r * c + k].exp() * total;
                    }
                }
            }
        }
    }
}

fn axpy(acc: &mut [f64], s: f64, g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += s * b;
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        self.tape.value(*self)
    }

    /// First element of the recorded value; meant for scalar outputs.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.matmul(self, other)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.add(self, other)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.sub(self, other)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.mul(self, other)
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.tape.scale(self, s)
    }

    pub fn silu(self) -> Var<'t> {
        self.tape.silu(self)
    }

    pub fn square(self) -> Var<'t> {
        self.tape.square(self)
    }

    pub fn sum(self) -> Var<'t> {
        self.tape.sum(self)
    }

    pub fn mean(self) -> Var<'t> {
        self.tape.mean(self)
    }
}
