use crate::error::{Result, TopoError};

/// `n` points in `d` dimensions, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(n: usize, d: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(TopoError::InvalidCloud("no points".into()));
        }
        if coords.len() != n * d {
            return Err(TopoError::InvalidCloud(format!(
                "{} coordinates for {n} points of dimension {d}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(TopoError::InvalidCloud("non-finite coordinate".into()));
        }
        Ok(Self { n, d, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(TopoError::InvalidCloud("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Dense `n×n` Euclidean distance matrix.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.distance(i, j);
                out[i * n + j] = d;
                out[j * n + i] = d;
            }
        }
        out
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.d, self.coords.iter().map(|c| c * factor).collect())
    }

    /// Sub-cloud made of the given point indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self::new(indices.len(), self.d, coords)
    }
}
