use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cloud::PointCloud;
use crate::cohomology::flag_persistence;
use crate::error::{Result, TopoError};
use crate::filtration::{check_capacity, Filtration, FiltrationKind};
use crate::reduction::{reduce, Reduction};

/// One persistence pair. `death` is `f64::INFINITY` for essential classes.
///
/// Rips diagrams record the critical edge (vertex pair) realising each finite
/// birth or death value; vertex births carry no edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub dim: usize,
    pub birth: f64,
    #[serde(serialize_with = "ser_value", deserialize_with = "de_value")]
    pub death: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_edge: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_edge: Option<(u32, u32)>,
}

impl Feature {
    pub fn new(dim: usize, birth: f64, death: f64) -> Self {
        Self {
            dim,
            birth,
            death,
            birth_edge: None,
            death_edge: None,
        }
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }
}

fn ser_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_value<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad death value {t:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub kind: FiltrationKind,
    pub features: Vec<Feature>,
}

impl PersistenceDiagram {
    pub fn new(kind: FiltrationKind, mut features: Vec<Feature>) -> Self {
        features.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
        });
        Self { kind, features }
    }

    pub fn dim(&self, dim: usize) -> impl Iterator<Item = &Feature> {
        self.features.iter().filter(move |f| f.dim == dim)
    }

    /// Features of one dimension as `(birth, death)` pairs.
    pub fn pairs(&self, dim: usize) -> Vec<(f64, f64)> {
        self.dim(dim).map(|f| (f.birth, f.death)).collect()
    }

    /// Sum of finite lifetimes in one dimension.
    pub fn total_persistence(&self, dim: usize) -> f64 {
        self.dim(dim)
            .filter(|f| f.is_finite())
            .map(Feature::lifetime)
            .fold(0.0, |a, b| a + b)
    }

    /// Largest finite lifetime in one dimension, 0 if there is none.
    pub fn max_lifetime(&self, dim: usize) -> f64 {
        self.dim(dim)
            .filter(|f| f.is_finite())
            .map(Feature::lifetime)
            .fold(0.0, f64::max)
    }

    /// Whether every finite birth and death beyond dimension-0 vertex births
    /// carries a critical edge.
    pub fn has_critical_edges(&self) -> bool {
        self.features.iter().all(|f| {
            (f.dim == 0 || f.birth_edge.is_some()) && (!f.is_finite() || f.death_edge.is_some())
        })
    }

    /// CSV with header `dim,birth,death`; infinite deaths written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,birth,death\n");
        for f in &self.features {
            let death = if f.is_finite() {
                f.death.to_string()
            } else {
                "inf".to_string()
            };
            out.push_str(&format!("{},{},{}\n", f.dim, f.birth, death));
        }
        out
    }

    pub fn from_csv(kind: FiltrationKind, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "dim,birth,death" => {}
            other => return Err(TopoError::Parse(format!("bad header {other:?}"))),
        }
        let mut features = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(TopoError::Parse(line.to_string()));
            }
            let bad = |_| TopoError::Parse(line.to_string());
            let dim: usize = cols[0].parse().map_err(|_| TopoError::Parse(line.to_string()))?;
            let birth: f64 = cols[1].parse().map_err(bad)?;
            let death: f64 = if cols[2] == "inf" {
                f64::INFINITY
            } else {
                cols[2].parse().map_err(bad)?
            };
            if !(death >= birth) {
                return Err(TopoError::Parse(format!("death before birth: {line}")));
            }
            features.push(Feature::new(dim, birth, death));
        }
        Ok(Self::new(kind, features))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TopoError::Parse(e.to_string()))
    }
}

/// Longest edge of a simplex; equal lengths go to the lexicographically
/// smaller vertex pair.
fn critical_edge(vertices: &[u32], edge_value: impl Fn(u32, u32) -> f64) -> (u32, u32) {
    let mut best = (vertices[0], vertices[1]);
    let mut best_v = edge_value(best.0, best.1);
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            let v = edge_value(vertices[i], vertices[j]);
            if v > best_v {
                best = (vertices[i], vertices[j]);
                best_v = v;
            }
        }
    }
    best
}

/// Persistence diagram of `f`.
///
/// Clique filtrations with `max_dim = 1` go through the edge-coboundary
/// route, which never touches the stored triangles; everything else uses
/// standard column reduction. Both give the same diagram.
pub fn compute_persistence(f: &Filtration) -> PersistenceDiagram {
    if !(f.is_flag() && f.max_dim() == 1) {
        return compute_persistence_with(f, Reduction::Standard);
    }
    let n = f.n_vertices();
    let mut vertex_values = vec![0.0; n];
    let mut edges = Vec::new();
    let mut matrix = vec![f64::NAN; n * n];
    for s in f.simplices() {
        let v = s.vertices();
        match s.dim() {
            0 => vertex_values[v[0] as usize] = s.value(),
            1 => {
                edges.push((s.value(), v[0], v[1]));
                matrix[v[0] as usize * n + v[1] as usize] = s.value();
            }
            _ => {}
        }
    }
    let features = flag_persistence(
        &vertex_values,
        &edges,
        |a, b| Some(matrix[a as usize * n + b as usize]).filter(|x| !x.is_nan()),
        f.kind() == FiltrationKind::Rips,
    );
    PersistenceDiagram::new(f.kind(), features)
}

/// Rips persistence in dimensions `0..=max_dim` without materialising a
/// [`Filtration`] when `max_dim = 1`. Same result as
/// `compute_persistence(&rips_filtration(pc, max_dim, max_scale)?)`.
pub fn rips_persistence(
    pc: &PointCloud,
    max_dim: usize,
    max_scale: Option<f64>,
) -> Result<PersistenceDiagram> {
    if max_dim != 1 {
        return Ok(compute_persistence(&crate::filtration::rips_filtration(
            pc, max_dim, max_scale,
        )?));
    }
    check_capacity(pc.len(), max_dim)?;
    let scale = match max_scale {
        Some(s) if !(s > 0.0) => {
            return Err(TopoError::Parameter(format!(
                "max_scale must be positive, got {s}"
            )))
        }
        Some(s) => s,
        None => f64::INFINITY,
    };
    let n = pc.len();
    let dist = pc.distance_matrix();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            if dist[a * n + b] <= scale {
                edges.push((dist[a * n + b], a as u32, b as u32));
            }
        }
    }
    let features = flag_persistence(
        &vec![0.0; n],
        &edges,
        |a, b| {
            let d = dist[a as usize * n + b as usize];
            (d <= scale).then_some(d)
        },
        true,
    );
    Ok(PersistenceDiagram::new(FiltrationKind::Rips, features))
}

pub fn compute_persistence_with(f: &Filtration, strategy: Reduction) -> PersistenceDiagram {
    let pairing = reduce(f, strategy);
    let s = f.simplices();
    let n = f.n_vertices();

    let tagged = f.kind() == FiltrationKind::Rips;
    let mut edge_values = Vec::new();
    if tagged {
        edge_values = vec![f64::NAN; n * n];
        for e in s.iter().filter(|x| x.dim() == 1) {
            let v = e.vertices();
            edge_values[v[0] as usize * n + v[1] as usize] = e.value();
        }
    }
    let tag = |p: usize| -> Option<(u32, u32)> {
        if !tagged || s[p].dim() == 0 {
            return None;
        }
        Some(critical_edge(s[p].vertices(), |a, b| {
            edge_values[a as usize * n + b as usize]
        }))
    };

    let mut features = Vec::new();
    for &(b, d) in &pairing.pairs {
        if s[b].dim() > f.max_dim() || s[b].value() == s[d].value() {
            continue;
        }
        features.push(Feature {
            dim: s[b].dim(),
            birth: s[b].value(),
            death: s[d].value(),
            birth_edge: tag(b),
            death_edge: tag(d),
        });
    }
    for &b in &pairing.essential {
        features.push(Feature {
            dim: s[b].dim(),
            birth: s[b].value(),
            death: f64::INFINITY,
            birth_edge: tag(b),
            death_edge: None,
        });
    }
    PersistenceDiagram::new(f.kind(), features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::filtration::rips_filtration;

    #[test]
    fn single_point() {
        let pc = PointCloud::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let pd = compute_persistence(&rips_filtration(&pc, 1, Some(1.0)).unwrap());
        assert_eq!(pd.features.len(), 1);
        assert_eq!(pd.pairs(0), vec![(0.0, f64::INFINITY)]);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let pd = PersistenceDiagram::new(
            FiltrationKind::Rips,
            vec![
                Feature::new(0, 0.0, f64::INFINITY),
                Feature::new(1, 1.0, 1.5),
                Feature::new(0, 0.0, 0.25),
            ],
        );
        let csv = pd.to_csv();
        assert!(csv.contains("0,0,inf"));
        assert_eq!(PersistenceDiagram::from_csv(FiltrationKind::Rips, &csv).unwrap(), pd);
        let json = pd.to_json();
        assert!(json.contains("\"inf\""));
        assert_eq!(PersistenceDiagram::from_json(&json).unwrap(), pd);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(PersistenceDiagram::from_csv(FiltrationKind::Rips, "a,b\n").is_err());
        assert!(
            PersistenceDiagram::from_csv(FiltrationKind::Rips, "dim,birth,death\n1,2,1\n").is_err()
        );
    }

    #[test]
    fn critical_edge_ties_go_lexicographic() {
        let e = critical_edge(&[0, 1, 2], |_, _| 1.0);
        assert_eq!(e, (0, 1));
        let e = critical_edge(&[0, 1, 2], |a, b| if (a, b) == (1, 2) { 2.0 } else { 1.0 });
        assert_eq!(e, (1, 2));
    }
}
