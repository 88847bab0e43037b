use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Result, TopoError};

/// Largest point count accepted for homology up to dimension 1.
pub const MAX_POINTS_DIM1: usize = 2048;
/// Largest point count accepted for homology up to dimension 2.
pub const MAX_POINTS_DIM2: usize = 512;
/// Hard cap on the number of simplices materialised by one filtration.
pub const MAX_SIMPLICES: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationKind {
    Rips,
    Witness,
    Dtm,
}

/// A simplex of dimension 0..=3 with its filtration value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Simplex {
    vertices: [u32; 4],
    dim: u8,
    value: f64,
}

impl Simplex {
    pub fn new(vertices: &[u32], value: f64) -> Self {
        assert!(!vertices.is_empty() && vertices.len() <= 4);
        let mut v = [0u32; 4];
        v[..vertices.len()].copy_from_slice(vertices);
        v[..vertices.len()].sort_unstable();
        Self {
            vertices: v,
            dim: (vertices.len() - 1) as u8,
            value,
        }
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..=self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Simplices ordered by `(value, dimension, vertex tuple)`.
///
/// Homology is reported for dimensions `0..=max_dim`; simplices of dimension
/// `max_dim + 1` are present only so that `max_dim` classes can die.
#[derive(Clone, Debug)]
pub struct Filtration {
    kind: FiltrationKind,
    n_vertices: usize,
    max_dim: usize,
    simplices: Vec<Simplex>,
    /// Built as a clique complex: higher simplices are determined by edges.
    flag: bool,
}

impl Filtration {
    /// Assembles a filtration from arbitrary simplices, sorting them into
    /// canonical order. Fails if a face is missing or enters after a coface.
    pub fn from_simplices(
        kind: FiltrationKind,
        n_vertices: usize,
        max_dim: usize,
        mut simplices: Vec<Simplex>,
    ) -> Result<Self> {
        if simplices.iter().any(|s| !(s.value >= 0.0)) {
            return Err(TopoError::Parameter(
                "filtration values must be non-negative".into(),
            ));
        }
        sort_canonical(&mut simplices);
        let f = Self {
            kind,
            n_vertices,
            max_dim,
            simplices,
            flag: false,
        };
        f.check_faces()?;
        Ok(f)
    }

    pub fn kind(&self) -> FiltrationKind {
        self.kind
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn is_flag(&self) -> bool {
        self.flag
    }

    pub fn count_by_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim() == dim).count()
    }

    fn check_faces(&self) -> Result<()> {
        use std::collections::HashMap;
        let mut seen: HashMap<Vec<u32>, f64> = HashMap::new();
        for s in &self.simplices {
            if s.dim() > 0 {
                let v = s.vertices();
                for skip in 0..v.len() {
                    let face: Vec<u32> = v
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    match seen.get(&face) {
                        Some(&fv) if fv <= s.value => {}
                        _ => {
                            return Err(TopoError::Parameter(format!(
                                "face {face:?} missing or later than {v:?}"
                            )))
                        }
                    }
                }
            }
            seen.insert(s.vertices().to_vec(), s.value);
        }
        Ok(())
    }
}

pub(crate) fn sort_canonical(simplices: &mut [Simplex]) {
    simplices.sort_unstable_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.dim.cmp(&b.dim))
            .then_with(|| a.vertices().cmp(b.vertices()))
    });
}

pub(crate) fn check_capacity(n: usize, max_dim: usize) -> Result<()> {
    let limit = match max_dim {
        1 => MAX_POINTS_DIM1,
        2 => MAX_POINTS_DIM2,
        _ => {
            return Err(TopoError::Parameter(format!(
                "max_dim must be 1 or 2, got {max_dim}"
            )))
        }
    };
    if n > limit {
        return Err(TopoError::Capacity(format!(
            "{n} points exceed the limit of {limit} for max_dim {max_dim}"
        )));
    }
    Ok(())
}

/// Clique complex of a weighted graph, up to dimension `top_dim`.
///
/// `edge_values` is a dense symmetric `n×n` matrix; a simplex takes the
/// largest value among its vertices and edges, and is kept when that value
/// does not exceed `max_scale`.
pub(crate) fn flag_complex(
    kind: FiltrationKind,
    vertex_values: &[f64],
    edge_values: &[f64],
    max_scale: f64,
    max_dim: usize,
) -> Result<Filtration> {
    let n = vertex_values.len();
    let top_dim = max_dim + 1;
    let ev = |i: usize, j: usize| edge_values[i * n + j];
    let mut simplices = Vec::new();
    for (i, &v) in vertex_values.iter().enumerate() {
        simplices.push(Simplex::new(&[i as u32], v));
    }

    // Upper adjacency within the scale.
    let mut adjacent = vec![false; n * n];
    let mut upper: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let value = ev(i, j).max(vertex_values[i]).max(vertex_values[j]);
            if value <= max_scale {
                adjacent[i * n + j] = true;
                adjacent[j * n + i] = true;
                upper[i].push(j as u32);
                simplices.push(Simplex::new(&[i as u32, j as u32], value));
            }
        }
    }

    let budget_err = || {
        TopoError::Capacity(format!(
            "filtration would exceed {MAX_SIMPLICES} simplices"
        ))
    };
    if top_dim >= 2 {
        for i in 0..n {
            for (a, &j) in upper[i].iter().enumerate() {
                let j = j as usize;
                for &k in &upper[i][a + 1..] {
                    let k = k as usize;
                    if !adjacent[j * n + k] {
                        continue;
                    }
                    let tri = ev(i, j).max(ev(i, k)).max(ev(j, k));
                    let tri = tri
                        .max(vertex_values[i])
                        .max(vertex_values[j])
                        .max(vertex_values[k]);
                    simplices.push(Simplex::new(&[i as u32, j as u32, k as u32], tri));
                    if top_dim >= 3 {
                        for &l in &upper[i][a + 1..] {
                            let l = l as usize;
                            if l <= k || !adjacent[j * n + l] || !adjacent[k * n + l] {
                                continue;
                            }
                            let tet = tri
                                .max(ev(i, l))
                                .max(ev(j, l))
                                .max(ev(k, l))
                                .max(vertex_values[l]);
                            simplices.push(Simplex::new(
                                &[i as u32, j as u32, k as u32, l as u32],
                                tet,
                            ));
                        }
                    }
                    if simplices.len() > MAX_SIMPLICES {
                        return Err(budget_err());
                    }
                }
            }
        }
    }

    sort_canonical(&mut simplices);
    Ok(Filtration {
        kind,
        n_vertices: n,
        max_dim,
        simplices,
        flag: true,
    })
}

/// Vietoris-Rips filtration: each simplex enters at the largest pairwise
/// distance among its vertices.
///
/// `max_scale = None` uses the cloud diameter, which admits every simplex.
pub fn rips_filtration(
    pc: &PointCloud,
    max_dim: usize,
    max_scale: Option<f64>,
) -> Result<Filtration> {
    check_capacity(pc.len(), max_dim)?;
    let dist = pc.distance_matrix();
    let scale = match max_scale {
        Some(s) if s > 0.0 => s,
        Some(s) => {
            return Err(TopoError::Parameter(format!(
                "max_scale must be positive, got {s}"
            )))
        }
        None => dist.iter().cloned().fold(0.0, f64::max),
    };
    flag_complex(
        FiltrationKind::Rips,
        &vec![0.0; pc.len()],
        &dist,
        scale,
        max_dim,
    )
}

/// Distance-to-measure value of every point: root mean squared distance to
/// its `k` nearest other points.
pub fn dtm_values(pc: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let n = pc.len();
    if k == 0 || k >= n {
        return Err(TopoError::Parameter(format!(
            "dtm needs 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let dist = pc.distance_matrix();
    let mut out = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| dist[i * n + j]));
        row.select_nth_unstable_by(k - 1, f64::total_cmp);
        let mean_sq = row[..k].iter().map(|d| d * d).sum::<f64>() / k as f64;
        out.push(mean_sq.sqrt());
    }
    Ok(out)
}

/// DTM-weighted filtration: vertices enter at their DTM value and each
/// higher simplex at `max(max DTM of its vertices, half its diameter)`.
pub fn dtm_filtration(pc: &PointCloud, k: usize, max_dim: usize) -> Result<Filtration> {
    check_capacity(pc.len(), max_dim)?;
    let dtm = dtm_values(pc, k)?;
    let half: Vec<f64> = pc.distance_matrix().iter().map(|d| d / 2.0).collect();
    flag_complex(FiltrationKind::Dtm, &dtm, &half, f64::INFINITY, max_dim)
}
