//! Dimension 0 and 1 persistence of a clique filtration without storing its
//! triangles.
//!
//! β₀ pairs come from union-find over edges in filtration order (elder rule).
//! β₁ pairs come from reducing edge coboundaries, youngest edge first, over
//! triangles generated on the fly. Edges that merged components have zero
//! coboundary after reduction and are skipped. The pairing is the same one
//! the boundary reduction produces for the same simplex order.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::diagram::Feature;

/// Triangle in canonical filtration order: value, then vertex tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Tri {
    value: f64,
    v: [u32; 3],
}

impl Eq for Tri {}

impl Ord for Tri {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| self.v.cmp(&other.v))
    }
}

impl PartialOrd for Tri {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn key(t: &Tri) -> (u64, [u32; 3]) {
    (t.value.to_bits(), t.v)
}

/// Symmetric difference of two ascending triangle lists.
fn add(a: &[Tri], b: &[Tri]) -> Vec<Tri> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Dimension 0 and 1 features of the clique filtration given by vertex
/// values and edges `(value, a, b)` with `a < b`.
///
/// `edge_value` must return the value of every edge in `edges` and `None`
/// for absent pairs. With `tags`, finite births and deaths carry their
/// critical edge.
pub(crate) fn flag_persistence(
    vertex_values: &[f64],
    edges: &[(f64, u32, u32)],
    edge_value: impl Fn(u32, u32) -> Option<f64>,
    tags: bool,
) -> Vec<Feature> {
    let n = vertex_values.len();
    let mut features = Vec::new();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vertex_values[a].total_cmp(&vertex_values[b]).then(a.cmp(&b)));
    let mut vpos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        vpos[v] = p;
    }
    let mut edges = edges.to_vec();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    // Union-find whose roots are the oldest vertex of each component.
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merges = vec![false; edges.len()];
    for (i, &(value, a, b)) in edges.iter().enumerate() {
        let ra = find(&mut parent, a as usize);
        let rb = find(&mut parent, b as usize);
        if ra == rb {
            continue;
        }
        merges[i] = true;
        let (old, young) = if vpos[ra] < vpos[rb] { (ra, rb) } else { (rb, ra) };
        parent[young] = old;
        if vertex_values[young] < value {
            features.push(Feature {
                dim: 0,
                birth: vertex_values[young],
                death: value,
                birth_edge: None,
                death_edge: tags.then_some((a, b)),
            });
        }
    }
    for v in 0..n {
        if find(&mut parent, v) == v {
            features.push(Feature::new(0, vertex_values[v], f64::INFINITY));
        }
    }

    let critical = |t: &Tri| -> (u32, u32) {
        let [a, b, c] = t.v;
        let mut best = (a, b);
        for e in [(a, c), (b, c)] {
            if edge_value(e.0, e.1) > edge_value(best.0, best.1) {
                best = e;
            }
        }
        best
    };

    let coboundary = |value: f64, a: u32, b: u32| -> Vec<Tri> {
        (0..n as u32)
            .filter(|&c| c != a && c != b)
            .filter_map(|c| {
                let ac = edge_value(a.min(c), a.max(c))?;
                let bc = edge_value(b.min(c), b.max(c))?;
                let mut v = [a, b, c];
                v.sort_unstable();
                Some(Tri {
                    value: value.max(ac).max(bc),
                    v,
                })
            })
            .collect()
    };

    // Columns never modified by an addition are regenerated on demand
    // instead of stored.
    let mut pivots: HashMap<(u64, [u32; 3]), usize> = HashMap::new();
    let mut stored: HashMap<usize, Vec<Tri>> = HashMap::new();
    for i in (0..edges.len()).rev() {
        if merges[i] {
            continue;
        }
        let (value, a, b) = edges[i];
        let mut col = coboundary(value, a, b);
        let mut pivot = col.iter().min().copied();
        let mut modified = false;
        if pivot.is_some_and(|p| pivots.contains_key(&key(&p))) {
            col.sort_unstable();
            while let Some(p) = col.first() {
                let Some(&j) = pivots.get(&key(p)) else { break };
                col = match stored.get(&j) {
                    Some(other) => add(&col, other),
                    None => {
                        let (v, x, y) = edges[j];
                        let mut other = coboundary(v, x, y);
                        other.sort_unstable();
                        add(&col, &other)
                    }
                };
            }
            pivot = col.first().copied();
            modified = true;
        }
        match pivot {
            None => features.push(Feature {
                dim: 1,
                birth: value,
                death: f64::INFINITY,
                birth_edge: tags.then_some((a, b)),
                death_edge: None,
            }),
            Some(t) => {
                pivots.insert(key(&t), i);
                if t.value > value {
                    features.push(Feature {
                        dim: 1,
                        birth: value,
                        death: t.value,
                        birth_edge: tags.then_some((a, b)),
                        death_edge: tags.then(|| critical(&t)),
                    });
                }
                if modified {
                    stored.insert(i, col);
                }
            }
        }
    }
    features
}
