use overlap_autodiff::Tensor;
use overlap_topo::PointCloud;

use crate::error::{HarnessError, Result};

pub const TRAJECTORY_COMPONENTS: usize = 8;

/// Point cloud built from stacked trajectory states.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryCloud {
    pub cloud: PointCloud,
    /// Share of total variance kept by the retained components.
    pub explained: f64,
    pub components: usize,
}

/// Eigenvalues and column eigenvectors of a symmetric matrix by cyclic
/// Jacobi rotations, sorted by decreasing eigenvalue.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    (0..n).for_each(|i| v[i * n + i] = 1.0);
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off <= 1e-26 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        // fix the sign so the largest entry is positive
        let pivot = (0..n)
            .max_by(|&r, &s| v[r * n + src].abs().total_cmp(&v[s * n + src].abs()))
            .unwrap_or(0);
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[r * n + col] = sign * v[r * n + src];
        }
    }
    (values, vectors)
}

/// Stacks every state of a trajectory (all grid times, all batch rows) and
/// projects the points onto their top [`TRAJECTORY_COMPONENTS`] principal
/// components.
pub fn trajectory_to_cloud(trajectory: &[Tensor]) -> Result<TrajectoryCloud> {
    let mut rows: Vec<&[f64]> = Vec::new();
    for t in trajectory {
        match t.rank() {
            1 => rows.push(t.data()),
            2 => rows.extend((0..t.rows()).map(|r| t.row(r))),
            _ => return Err(HarnessError::Degenerate(format!("trajectory state of shape {:?}", t.shape()))),
        }
    }
    if rows.len() < 4 {
        return Err(HarnessError::Degenerate(format!("need at least 4 trajectory points, got {}", rows.len())));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(HarnessError::Degenerate("trajectory states differ in size".into()));
    }
    let n = rows.len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; d * d];
    for r in &rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= (n - 1) as f64;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let total: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if !(total > 1e-24) {
        return Err(HarnessError::Degenerate("trajectory has zero variance".into()));
    }
    let (values, vectors) = symmetric_eigen(&cov, d);
    let k = TRAJECTORY_COMPONENTS.min(d);
    let kept: f64 = values[..k].iter().map(|v| v.max(0.0)).sum();
    let mut coords = Vec::with_capacity(n * k);
    for r in &rows {
        for c in 0..k {
            coords.push((0..d).map(|j| (r[j] - mean[j]) * vectors[j * d + c]).sum());
        }
    }
    Ok(TrajectoryCloud {
        cloud: PointCloud::new(n, k, coords)?,
        explained: (kept / total).min(1.0),
        components: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_a_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let (vals, vecs) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let h = 0.5f64.sqrt();
        assert!((vecs[0] - h).abs() < 1e-12 && (vecs[2] - h).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectory_is_degenerate() {
        let t = vec![Tensor::vector(vec![1.0, 2.0, 3.0]); 6];
        assert!(matches!(trajectory_to_cloud(&t), Err(HarnessError::Degenerate(_))));
        assert!(trajectory_to_cloud(&t[..3]).is_err());
    }

    #[test]
    fn low_dimensional_trajectory_keeps_all_variance() {
        let t: Vec<Tensor> = (0..10)
            .map(|i| Tensor::vector(vec![i as f64, 2.0 * i as f64, (i * i) as f64, 1.0]))
            .collect();
        let tc = trajectory_to_cloud(&t).unwrap();
        assert_eq!(tc.components, 4);
        assert!((tc.explained - 1.0).abs() < 1e-12);
    }
}
