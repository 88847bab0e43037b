use std::collections::VecDeque;

use crate::cloud::PointCloud;
use crate::diagram::{rips_persistence, PersistenceDiagram};
use crate::error::Result;

/// Bottleneck distance between two diagrams in one dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bottleneck {
    pub distance: f64,
    /// The diagrams have different numbers of infinite features; `distance`
    /// is then `+∞`.
    pub infinite_mismatch: bool,
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn half_life(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Maximum bipartite matching size by Hopcroft-Karp.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    let n_left = adj.len();
    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; n_left];
    let mut match_r = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;
    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return size;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                let ok = w == usize::MAX
                    || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist));
                if ok {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..n_left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                size += 1;
            }
        }
    }
}

/// Bottleneck distance between two multisets of finite `(birth, death)`
/// points, each point optionally matched to the diagonal.
pub fn bottleneck_finite(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n + m == 0 {
        return 0.0;
    }
    // Left: a[0..n] then diagonal copies of b. Right: b[0..m] then diagonal
    // copies of a. Diagonal-to-diagonal edges always cost 0.
    let cost = |l: usize, r: usize| -> Option<f64> {
        match (l < n, r < m) {
            (true, true) => Some(linf(a[l], b[r])),
            (true, false) => (r - m == l).then(|| half_life(a[l])),
            (false, true) => (l - n == r).then(|| half_life(b[r])),
            (false, false) => Some(0.0),
        }
    };
    let mut candidates = vec![0.0];
    candidates.extend(a.iter().map(|&p| half_life(p)));
    candidates.extend(b.iter().map(|&p| half_life(p)));
    for &p in a {
        for &q in b {
            candidates.push(linf(p, q));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let size = n + m;
    let feasible = |eps: f64| {
        let adj: Vec<Vec<usize>> = (0..size)
            .map(|l| {
                (0..size)
                    .filter(|&r| cost(l, r).is_some_and(|c| c <= eps))
                    .collect()
            })
            .collect();
        max_matching(&adj, size) == size
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Bottleneck distance between the dimension-`dim` parts of two diagrams.
///
/// Infinite features are matched only with each other, in birth order.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> Bottleneck {
    let split = |pd: &PersistenceDiagram| {
        let mut finite = Vec::new();
        let mut births = Vec::new();
        for f in pd.dim(dim) {
            if f.is_finite() {
                finite.push((f.birth, f.death));
            } else {
                births.push(f.birth);
            }
        }
        births.sort_by(f64::total_cmp);
        (finite, births)
    };
    let (f1, i1) = split(d1);
    let (f2, i2) = split(d2);
    if i1.len() != i2.len() {
        return Bottleneck {
            distance: f64::INFINITY,
            infinite_mismatch: true,
        };
    }
    let inf_cost = i1
        .iter()
        .zip(&i2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Bottleneck {
        distance: bottleneck_finite(&f1, &f2).max(inf_cost),
        infinite_mismatch: false,
    }
}

pub fn bottleneck_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> f64 {
    bottleneck(d1, d2, dim).distance
}

/// Normalised bottleneck distance between two β₁ diagrams: `W∞` divided by
/// the larger of the two maximum lifetimes.
///
/// Both diagrams empty gives 0; exactly one empty gives 1.
pub fn tsas_from_diagrams(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> f64 {
    let e1 = d1.dim(1).next().is_none();
    let e2 = d2.dim(1).next().is_none();
    match (e1, e2) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            let scale = d1.max_lifetime(1).max(d2.max_lifetime(1));
            let w = bottleneck_distance(d1, d2, 1);
            if scale > 0.0 {
                w / scale
            } else {
                0.0
            }
        }
    }
}

/// Trajectory structural alignment: TSAS of the Rips β₁ diagrams of two
/// point clouds.
pub fn tsas(traj_a: &PointCloud, traj_b: &PointCloud) -> Result<f64> {
    let da = rips_persistence(traj_a, 1, None)?;
    let db = rips_persistence(traj_b, 1, None)?;
    Ok(tsas_from_diagrams(&da, &db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::Feature;
    use crate::filtration::FiltrationKind;

    fn diagram(dim: usize, pts: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(
            FiltrationKind::Rips,
            pts.iter().map(|&(b, d)| Feature::new(dim, b, d)).collect(),
        )
    }

    #[test]
    fn small_cases() {
        assert_eq!(bottleneck_finite(&[(0.0, 2.0)], &[]), 1.0);
        assert_eq!(bottleneck_finite(&[(0.0, 2.0)], &[(0.0, 3.0)]), 1.0);
        assert_eq!(bottleneck_finite(&[], &[]), 0.0);
    }

    #[test]
    fn infinite_count_mismatch() {
        let a = diagram(0, &[(0.0, f64::INFINITY)]);
        let b = diagram(0, &[(0.0, f64::INFINITY), (0.0, f64::INFINITY)]);
        let r = bottleneck(&a, &b, 0);
        assert!(r.infinite_mismatch);
        assert_eq!(r.distance, f64::INFINITY);
    }

    #[test]
    fn infinite_births_compared() {
        let a = diagram(0, &[(0.0, f64::INFINITY), (0.0, 1.0)]);
        let b = diagram(0, &[(0.5, f64::INFINITY), (0.0, 1.0)]);
        assert_eq!(bottleneck_distance(&a, &b, 0), 0.5);
    }

    #[test]
    fn tsas_conventions() {
        let empty = diagram(1, &[]);
        let one = diagram(1, &[(1.0, 2.0)]);
        assert_eq!(tsas_from_diagrams(&empty, &empty), 0.0);
        assert_eq!(tsas_from_diagrams(&one, &empty), 1.0);
        assert_eq!(tsas_from_diagrams(&one, &one), 0.0);
    }
}
