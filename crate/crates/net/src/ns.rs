use overlap_autodiff::{singular_values, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NetError, Result};

/// Squared singular values of `z` reshaped row-major to `d1 × d2`,
/// normalised to sum to one, descending.
pub fn schmidt_weights(z: &[f64], d1: usize, d2: usize) -> Result<Vec<f64>> {
    if z.len() != d1 * d2 || d1 == 0 || d2 == 0 {
        return Err(NetError::Dimension(format!(
            "vector of length {} cannot be reshaped to {d1}x{d2}",
            z.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(NetError::Undefined("non-finite representation".into()));
    }
    if z.iter().all(|&v| v == 0.0) {
        return Err(NetError::Undefined("entropy of the zero vector".into()));
    }
    let s = singular_values(&Tensor::matrix(d1, d2, z.to_vec())?)?;
    let total: f64 = s.iter().map(|v| v * v).sum();
    Ok(s.iter().map(|v| v * v / total).collect())
}

/// Schmidt entropy in nats: `−Σ p ln p` over the weights of
/// [`schmidt_weights`]. Lies in `[0, ln min(d1, d2)]` and is zero exactly
/// for rank-one reshapes.
pub fn ns_entropy(z: &[f64], d1: usize, d2: usize) -> Result<f64> {
    let p = schmidt_weights(z, d1, d2)?;
    Ok(-p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>())
}

/// Fixed linear map with orthonormal rows or columns between a latent of
/// size `from` and a `d1·d2` reshape, used when the two sizes differ.
#[derive(Clone, Debug, PartialEq)]
pub struct NsProjection {
    pub from: usize,
    pub d1: usize,
    pub d2: usize,
    /// Row-major `(d1·d2) × from`.
    matrix: Vec<f64>,
}

impl NsProjection {
    /// Draws a Gaussian matrix and orthonormalises along its shorter side,
    /// so the map is an isometry when it embeds and a co-isometry when it
    /// compresses. The identity when `from == d1·d2`.
    pub fn new(from: usize, d1: usize, d2: usize, seed: u64) -> Self {
        let to = d1 * d2;
        if from == to {
            let mut m = vec![0.0; to * from];
            (0..to).for_each(|i| m[i * from + i] = 1.0);
            return Self { from, d1, d2, matrix: m };
        }
        let (k, len) = (from.min(to), from.max(to));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
        while vecs.len() < k {
            let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for b in &vecs {
                    let dot: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
                    v.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
                }
            }
            let norm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|p| *p /= norm);
                vecs.push(v);
            }
        }
        let mut matrix = vec![0.0; to * from];
        for (c, v) in vecs.iter().enumerate() {
            for (r, &val) in v.iter().enumerate() {
                if to > from {
                    matrix[r * from + c] = val;
                } else {
                    matrix[c * from + r] = val;
                }
            }
        }
        Self { from, d1, d2, matrix }
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.from {
            return Err(NetError::Dimension(format!(
                "projection expects length {}, got {}",
                self.from,
                z.len()
            )));
        }
        Ok(self
            .matrix
            .chunks(self.from)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn entropy(&self, z: &[f64]) -> Result<f64> {
        ns_entropy(&self.apply(z)?, self.d1, self.d2)
    }

    /// Entropy of every row of a `[batch, from]` matrix.
    pub fn entropies(&self, rows: &Tensor) -> Result<Vec<f64>> {
        (0..rows.rows()).map(|r| self.entropy(rows.row(r))).collect()
    }
}
