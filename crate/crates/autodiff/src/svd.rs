use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Thin singular value decomposition `m = u · diag(s) · vᵀ`.
///
/// For an `r×c` input with `k = min(r, c)`: `u` is `r×k`, `v` is `c×k`, and
/// `s` holds `k` non-negative values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Tensor,
    pub s: Vec<f64>,
    pub v: Tensor,
}

const MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of a working copy are orthogonalised pairwise by plane rotations
/// until every pair is orthogonal to machine precision. Singular values are
/// the resulting column norms. Accurate for the small dense matrices this
/// crate deals with; not intended for large problems.
pub fn svd(m: &Tensor) -> Result<Svd> {
    if m.rank() != 2 {
        return Err(AutodiffError::Invalid("svd needs a matrix".into()));
    }
    if !m.is_finite() {
        return Err(AutodiffError::NonFinite("svd"));
    }
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }

    // Column-major working copy so rotations touch contiguous memory.
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = a
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let k = cols;
    let s: Vec<f64> = order.iter().map(|&(sv, _)| sv).collect();
    let scale = s.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &(sv, j) in &order {
        if sv > 0.0 && sv > scale * 1e-13 {
            u_cols.push(a[j].iter().map(|x| x / sv).collect());
        } else {
            u_cols.push(complete_basis(&u_cols, rows));
        }
    }

    let mut u = vec![0.0; rows * k];
    let mut vt = vec![0.0; cols * k];
    for (c, col) in u_cols.iter().enumerate() {
        for i in 0..rows {
            u[i * k + c] = col[i];
        }
    }
    for (c, &(_, j)) in order.iter().enumerate() {
        for i in 0..cols {
            vt[i * k + c] = v[j][i];
        }
    }
    Ok(Svd {
        u: Tensor::matrix(rows, k, u)?,
        s,
        v: Tensor::matrix(cols, k, vt)?,
    })
}

/// Singular values only, descending.
pub fn singular_values(m: &Tensor) -> Result<Vec<f64>> {
    Ok(svd(m)?.s)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Unit vector orthogonal to every column in `basis`, by Gram-Schmidt over
/// the standard basis.
fn complete_basis(basis: &[Vec<f64>], len: usize) -> Vec<f64> {
    for e in 0..len {
        let mut cand: Vec<f64> = (0..len).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for _ in 0..2 {
            for b in basis {
                let dot: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
                cand.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cand.iter_mut().for_each(|x| *x /= norm);
            return cand;
        }
    }
    vec![0.0; len]
}
