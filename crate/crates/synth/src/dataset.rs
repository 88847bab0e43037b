use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SynthError};

/// Feature dimension of each modality.
pub const DIM: usize = 64;
/// Basis directions `2..2 + NUISANCE_DIMS` carry label-free nuisance factors.
pub const NUISANCE_DIMS: usize = 8;
pub const NUISANCE_SCALE: f64 = 0.5;
/// Isotropic feature noise standard deviation.
pub const FEATURE_NOISE: f64 = 0.2;
/// Standard deviation of the additive noise on the continuous label.
pub const LABEL_NOISE: f64 = 0.1;
/// Rotation angle per unit of OOD shift, radians.
pub const OOD_ANGLE_PER_UNIT: f64 = std::f64::consts::PI / 16.0;

const BASE_FAMILY: &str = "xor64";
const MAGIC: &[u8; 8] = b"OVLSYN1\n";

/// Hidden structure of one sample: `c = a XOR b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Latent {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl Latent {
    fn to_byte(self) -> u8 {
        self.a as u8 | (self.b as u8) << 1 | (self.c as u8) << 2
    }

    fn from_byte(v: u8) -> Result<Self> {
        let l = Latent {
            a: v & 1 != 0,
            b: v & 2 != 0,
            c: v & 4 != 0,
        };
        if v > 7 || l.c != (l.a ^ l.b) {
            return Err(SynthError::Format(format!("bad latent byte {v}")));
        }
        Ok(l)
    }
}

/// Paired modalities with row-major `n × DIM` feature blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub family_id: String,
    pub seed: u64,
    pub entanglement: f64,
    /// Cumulative OOD shift applied after generation.
    pub shift: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Continuous label `c + N(0, LABEL_NOISE²)`.
    pub labels: Vec<f64>,
    pub latent: Vec<Latent>,
}

/// Orthonormal encoding bases of a family; `x[k]` is the k-th direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub family_id: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    pub entanglement: f64,
    pub shift: f64,
    pub format: String,
}

/// Validates a family id and returns its hash.
///
/// Accepted ids are `xor64` and `xor64/<tag>` with a non-empty tag of
/// ASCII letters, digits, `-`, `_` or `.`.
pub fn family_hash(family_id: &str) -> Result<u64> {
    let tag_ok = |t: &str| {
        !t.is_empty()
            && t.chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    };
    let valid = family_id == BASE_FAMILY
        || family_id
            .strip_prefix("xor64/")
            .is_some_and(tag_ok);
    if !valid {
        if family_id == "graph" || family_id.starts_with("graph/") {
            return Err(SynthError::Parameter(
                "graph-community families are not implemented".into(),
            ));
        }
        return Err(SynthError::Parameter(format!("unknown family `{family_id}`")));
    }
    let digest = Sha256::digest(family_id.as_bytes());
    Ok(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")))
}

fn orthonormal_basis(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(DIM);
    while basis.len() < DIM {
        let mut v: Vec<f64> = (0..DIM).map(|_| rng.sample(StandardNormal)).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
            }
        }
        let norm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|p| *p /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Encoding bases of a family. They depend only on the family id, so every
/// dataset drawn from one family shares them.
pub fn encoding(family_id: &str) -> Result<Encoding> {
    let h = family_hash(family_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    rng.set_stream(1);
    let x = orthonormal_basis(&mut rng);
    rng.set_stream(2);
    let y = orthonormal_basis(&mut rng);
    Ok(Encoding { x, y })
}

fn sign(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

fn encode(
    out: &mut Vec<f64>,
    basis: &[Vec<f64>],
    own: bool,
    c: bool,
    entanglement: f64,
    rng: &mut ChaCha8Rng,
) {
    let mut v: Vec<f64> = (0..DIM)
        .map(|_| FEATURE_NOISE * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut add = |dir: &[f64], w: f64| v.iter_mut().zip(dir).for_each(|(p, q)| *p += w * q);
    add(&basis[0], sign(own));
    add(&basis[1], entanglement * sign(c));
    for k in 0..NUISANCE_DIMS {
        let w = NUISANCE_SCALE * rng.sample::<f64, _>(StandardNormal);
        add(&basis[2 + k], w);
    }
    out.extend(v);
}

/// Draws `n` samples of a family.
///
/// Latent pairs `(a, b)` cycle through the four combinations in shuffled
/// order, so every class has `n/4` members up to rounding. `x` encodes `a`
/// along its first basis direction and `c = a XOR b` along its second with
/// weight `entanglement`; `y` does the same with `b`.
pub fn generate(family_id: &str, n: usize, seed: u64, entanglement: f64) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(SynthError::Parameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&entanglement) {
        return Err(SynthError::Parameter(format!(
            "entanglement must lie in [0, 1], got {entanglement}"
        )));
    }
    let h = family_hash(family_id)?;
    let enc = encoding(family_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);

    let mut combos: Vec<u8> = (0..n).map(|i| (i % 4) as u8).collect();
    combos.shuffle(&mut rng);

    let mut x = Vec::with_capacity(n * DIM);
    let mut y = Vec::with_capacity(n * DIM);
    let mut labels = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for combo in combos {
        let (a, b) = (combo & 1 != 0, combo & 2 != 0);
        let c = a ^ b;
        encode(&mut x, &enc.x, a, c, entanglement, &mut rng);
        encode(&mut y, &enc.y, b, c, entanglement, &mut rng);
        labels.push(c as u8 as f64 + LABEL_NOISE * rng.sample::<f64, _>(StandardNormal));
        latent.push(Latent { a, b, c });
    }
    Ok(SyntheticDataset {
        family_id: family_id.to_string(),
        seed,
        entanglement,
        shift: 0.0,
        x,
        y,
        labels,
        latent,
    })
}

/// Two families with the same latent task and independently drawn bases.
pub fn transfer_pair(seed: u64) -> (String, String) {
    (
        format!("{BASE_FAMILY}/s{seed:016x}-train"),
        format!("{BASE_FAMILY}/s{seed:016x}-novel"),
    )
}

fn rotate_scale(block: &mut [f64], theta: f64, scale: f64) {
    let (s, c) = theta.sin_cos();
    for row in block.chunks_mut(DIM) {
        for pair in row.chunks_mut(2) {
            let (p, q) = (pair[0], pair[1]);
            pair[0] = scale * (c * p - s * q);
            pair[1] = scale * (s * p + c * q);
        }
    }
}

/// Scales every feature vector by `1 + shift` and rotates consecutive
/// coordinate pairs by `shift · OOD_ANGLE_PER_UNIT`. Labels and latents are
/// untouched.
pub fn ood_variant(ds: &SyntheticDataset, shift: f64) -> Result<SyntheticDataset> {
    if !(shift >= 0.0) || !shift.is_finite() {
        return Err(SynthError::Parameter(format!("shift must be >= 0, got {shift}")));
    }
    let mut out = ds.clone();
    if shift == 0.0 {
        return Ok(out);
    }
    let theta = shift * OOD_ANGLE_PER_UNIT;
    rotate_scale(&mut out.x, theta, 1.0 + shift);
    rotate_scale(&mut out.y, theta, 1.0 + shift);
    out.shift += shift;
    Ok(out)
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * DIM..(i + 1) * DIM]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * DIM..(i + 1) * DIM]
    }

    /// Binary targets `label > 0.5` as 0/1.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| (l > 0.5) as u8 as f64).collect()
    }

    /// Fixed split: the first `round(train_fraction · n)` rows train, the
    /// rest test. Rows are already in random order.
    pub fn split(&self, train_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let cut = ((train_fraction * n as f64).round() as usize).min(n);
        ((0..cut).collect(), (cut..n).collect())
    }

    pub fn subset(&self, idx: &[usize]) -> SyntheticDataset {
        let rows = |block: &[f64]| {
            idx.iter()
                .flat_map(|&i| block[i * DIM..(i + 1) * DIM].iter().copied())
                .collect()
        };
        SyntheticDataset {
            family_id: self.family_id.clone(),
            seed: self.seed,
            entanglement: self.entanglement,
            shift: self.shift,
            x: rows(&self.x),
            y: rows(&self.y),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            latent: idx.iter().map(|&i| self.latent[i]).collect(),
        }
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            family_id: self.family_id.clone(),
            seed: self.seed,
            n: self.len(),
            dim: DIM,
            entanglement: self.entanglement,
            shift: self.shift,
            format: "f64le".into(),
        }
    }

    /// One row per sample: `x0..x63, y0..y63, label`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut head: Vec<String> = (0..DIM).map(|i| format!("x{i}")).collect();
        head.extend((0..DIM).map(|i| format!("y{i}")));
        head.push("label".into());
        writeln!(w, "{}", head.join(","))?;
        for i in 0..self.len() {
            let fields: Vec<String> = self
                .x_row(i)
                .iter()
                .chain(self.y_row(i))
                .chain(std::iter::once(&self.labels[i]))
                .map(|v| v.to_string())
                .collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Magic, little-endian header length, JSON header, then `x`, `y` and
    /// labels as little-endian `f64`, then one latent byte per sample.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header())
            .map_err(|e| SynthError::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in self.x.iter().chain(&self.y).chain(&self.labels) {
            w.write_all(&v.to_le_bytes())?;
        }
        let bytes: Vec<u8> = self.latent.iter().map(|l| l.to_byte()).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SynthError::Format("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 20 {
            return Err(SynthError::Format("header too long".into()));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: DatasetHeader =
            serde_json::from_slice(&header).map_err(|e| SynthError::Format(e.to_string()))?;
        if header.dim != DIM || header.format != "f64le" {
            return Err(SynthError::Format("unsupported layout".into()));
        }
        let n = header.n;
        let mut floats = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let x = floats(n * DIM)?;
        let y = floats(n * DIM)?;
        let labels = floats(n)?;
        let mut lat = vec![0u8; n];
        r.read_exact(&mut lat)?;
        let latent = lat.into_iter().map(Latent::from_byte).collect::<Result<_>>()?;
        Ok(SyntheticDataset {
            family_id: header.family_id,
            seed: header.seed,
            entanglement: header.entanglement,
            shift: header.shift,
            x,
            y,
            labels,
            latent,
        })
    }
}
