use std::collections::HashMap;

use crate::filtration::Filtration;

const NONE: u32 = u32::MAX;

/// Column-reduction strategy. Both yield the same pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Dimensions in ascending order, stopping a dimension early once every
    /// positive simplex below it has been paired.
    #[default]
    Standard,
    /// Dimensions in descending order; columns of simplices already known to
    /// be births are zeroed without reduction.
    Clearing,
}

/// Persistence pairing as positions into the filtration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pairing {
    /// `(birth, death)` position pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Positions of unpaired births in dimensions `0..=max_dim`.
    pub essential: Vec<usize>,
}

struct Boundaries<'a> {
    f: &'a Filtration,
    n: usize,
    vertex_pos: Vec<u32>,
    edge_pos: Vec<u32>,
    triangle_pos: HashMap<[u32; 3], u32>,
}

impl<'a> Boundaries<'a> {
    fn new(f: &'a Filtration) -> Self {
        let n = f.n_vertices();
        let mut vertex_pos = vec![NONE; n];
        let mut edge_pos = vec![NONE; n * n];
        let mut triangle_pos = HashMap::new();
        let has_tets = f.simplices().iter().any(|s| s.dim() == 3);
        for (p, s) in f.simplices().iter().enumerate() {
            let v = s.vertices();
            match s.dim() {
                0 => vertex_pos[v[0] as usize] = p as u32,
                1 => edge_pos[v[0] as usize * n + v[1] as usize] = p as u32,
                2 if has_tets => {
                    triangle_pos.insert([v[0], v[1], v[2]], p as u32);
                }
                _ => {}
            }
        }
        Self {
            f,
            n,
            vertex_pos,
            edge_pos,
            triangle_pos,
        }
    }

    fn edge(&self, a: u32, b: u32) -> u32 {
        self.edge_pos[a as usize * self.n + b as usize]
    }

    /// Boundary column of the simplex at position `p`, ascending.
    fn column(&self, p: usize) -> Vec<u32> {
        let v = self.f.simplices()[p].vertices();
        let mut col = match v.len() {
            1 => Vec::new(),
            2 => vec![self.vertex_pos[v[0] as usize], self.vertex_pos[v[1] as usize]],
            3 => vec![
                self.edge(v[0], v[1]),
                self.edge(v[0], v[2]),
                self.edge(v[1], v[2]),
            ],
            _ => vec![
                self.triangle_pos[&[v[0], v[1], v[2]]],
                self.triangle_pos[&[v[0], v[1], v[3]]],
                self.triangle_pos[&[v[0], v[2], v[3]]],
                self.triangle_pos[&[v[1], v[2], v[3]]],
            ],
        };
        col.sort_unstable();
        col
    }
}

/// Symmetric difference of two ascending index lists.
fn add_columns(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

struct Reducer<'a> {
    bounds: Boundaries<'a>,
    /// Column position owning each pivot row.
    owner: Vec<u32>,
    reduced: HashMap<u32, Vec<u32>>,
    negative: Vec<bool>,
    pairs: Vec<(usize, usize)>,
}

impl Reducer<'_> {
    fn reduce(&mut self, j: usize) {
        let mut col = self.bounds.column(j);
        while let Some(&low) = col.last() {
            let o = self.owner[low as usize];
            if o == NONE {
                self.owner[low as usize] = j as u32;
                self.negative[j] = true;
                self.pairs.push((low as usize, j));
                self.reduced.insert(j as u32, col);
                return;
            }
            col = add_columns(&col, &self.reduced[&o]);
        }
    }
}

/// Pairs the simplices of `f` by Z/2 boundary-matrix reduction.
pub fn reduce(f: &Filtration, strategy: Reduction) -> Pairing {
    let total = f.len();
    let max_dim = f.max_dim();
    let top = f.simplices().iter().map(|s| s.dim()).max().unwrap_or(0);
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    for (p, s) in f.simplices().iter().enumerate() {
        by_dim[s.dim()].push(p);
    }
    let mut r = Reducer {
        bounds: Boundaries::new(f),
        owner: vec![NONE; total],
        reduced: HashMap::new(),
        negative: vec![false; total],
        pairs: Vec::new(),
    };

    match strategy {
        Reduction::Standard => {
            let mut rank_below = 0;
            for k in 1..=top {
                let positives_below = by_dim[k - 1].len() - rank_below;
                let mut rank = 0;
                for &j in &by_dim[k] {
                    if rank == positives_below {
                        break;
                    }
                    let before = r.pairs.len();
                    r.reduce(j);
                    rank += r.pairs.len() - before;
                }
                rank_below = rank;
            }
        }
        Reduction::Clearing => {
            let mut cleared = vec![false; total];
            for k in (1..=top).rev() {
                for &j in &by_dim[k] {
                    if cleared[j] {
                        continue;
                    }
                    let before = r.pairs.len();
                    r.reduce(j);
                    if r.pairs.len() > before {
                        cleared[r.pairs[before].0] = true;
                    }
                }
            }
        }
    }

    let mut is_birth = vec![false; total];
    for &(b, _) in &r.pairs {
        is_birth[b] = true;
    }
    let essential = (0..total)
        .filter(|&p| f.simplices()[p].dim() <= max_dim && !r.negative[p] && !is_birth[p])
        .collect();
    let mut pairs = r.pairs;
    pairs.sort_unstable_by_key(|&(_, d)| d);
    Pairing { pairs, essential }
}
