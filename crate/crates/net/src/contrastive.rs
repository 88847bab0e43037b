use overlap_autodiff::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_EMBED: usize = 64;

/// Two independent three-layer encoders aligned by a symmetric InfoNCE
/// loss on cosine similarity, with a linear task head on `[ex, ey]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub d1: usize,
    pub d2: usize,
    pub embed: usize,
    pub hidden: usize,
    pub temperature: f64,
}

impl ContrastiveConfig {
    /// Encoder width whose total parameter count is closest to `budget`.
    pub fn matched(d1: usize, d2: usize, embed: usize, budget: usize) -> Self {
        let mut cfg = Self {
            d1,
            d2,
            embed,
            hidden: 1,
            temperature: DEFAULT_TEMPERATURE,
        };
        let mut best = (usize::MAX, 1);
        for h in 1..=4096 {
            cfg.hidden = h;
            let gap = cfg.param_count().abs_diff(budget);
            if gap < best.0 {
                best = (gap, h);
            }
        }
        cfg.hidden = best.1;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.embed == 0 || self.hidden == 0 {
            return Err(NetError::Parameter("contrastive dimensions must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(NetError::Parameter("temperature must be positive".into()));
        }
        Ok(())
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let (h, e) = (self.hidden, self.embed);
        let mut s = Vec::new();
        for d in [self.d1, self.d2] {
            s.extend([vec![d, h], vec![h], vec![h, h], vec![h], vec![h, e], vec![e]]);
        }
        s.extend([vec![2 * e, 1], vec![1]]);
        s
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveParams {
    pub config: ContrastiveConfig,
    tensors: Vec<Tensor>,
}

impl ContrastiveParams {
    pub fn init(config: ContrastiveConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = config
            .shapes()
            .into_iter()
            .map(|s| {
                if s.len() == 1 {
                    return Tensor::zeros(&s);
                }
                let sd = 1.0 / (s[0] as f64).sqrt();
                let data = (0..s[0] * s[1]).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
                Tensor::new(s, data).expect("shape matches data")
            })
            .collect();
        Ok(Self { config, tensors })
    }

    pub fn from_tensors(config: ContrastiveConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let shapes = config.shapes();
        if tensors.len() != shapes.len()
            || tensors.iter().zip(&shapes).any(|(t, s)| t.shape() != s.as_slice())
        {
            return Err(NetError::Dimension("tensor shapes do not match the config".into()));
        }
        Ok(Self { config, tensors })
    }

    pub fn names(&self) -> Vec<&'static str> {
        vec![
            "x.w1", "x.b1", "x.w2", "x.b2", "x.w3", "x.b3", "y.w1", "y.b1", "y.w2", "y.b2",
            "y.w3", "y.b3", "head.w", "head.b",
        ]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.tensors.iter_mut().collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn on_tape<'t>(&self, tape: &'t Tape, trainable: bool) -> ContrastiveVars<'t> {
        let vars = self
            .tensors
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        ContrastiveVars {
            config: self.config,
            vars,
        }
    }

    /// `(representation, logits)` without gradients; the representation is
    /// `[ex, ey]` per row.
    pub fn embed(&self, x: &Tensor, y: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        let tape = Tape::new();
        let cv = self.on_tape(&tape, false);
        let out = cv.forward(tape.constant(x.clone()), tape.constant(y.clone()))?;
        let rep = out.representation.value().clone();
        let logits = out.logits.value().data().to_vec();
        Ok((rep, logits))
    }
}

pub struct ContrastiveVars<'t> {
    pub config: ContrastiveConfig,
    pub vars: Vec<Var<'t>>,
}

pub struct ContrastiveForward<'t> {
    pub ex: Var<'t>,
    pub ey: Var<'t>,
    pub representation: Var<'t>,
    pub logits: Var<'t>,
}

impl<'t> ContrastiveVars<'t> {
    fn encode(&self, input: Var<'t>, offset: usize) -> Result<Var<'t>> {
        let tape = input.tape();
        let p = &self.vars[offset..offset + 6];
        let h = tape.affine(input, p[0], p[1])?.silu();
        let h = tape.affine(h, p[2], p[3])?.silu();
        Ok(tape.affine(h, p[4], p[5])?)
    }

    pub fn forward(&self, x: Var<'t>, y: Var<'t>) -> Result<ContrastiveForward<'t>> {
        let (xs, ys) = (x.shape(), y.shape());
        if xs.len() != 2 || ys.len() != 2 || xs[0] != ys[0] || xs[1] != self.config.d1 || ys[1] != self.config.d2 {
            return Err(NetError::Dimension(format!(
                "encoders expect [b,{}] and [b,{}], got {xs:?} and {ys:?}",
                self.config.d1, self.config.d2
            )));
        }
        let tape = x.tape();
        let ex = self.encode(x, 0)?;
        let ey = self.encode(y, 6)?;
        let representation = tape.concat(ex, ey)?;
        let logits = tape.affine(representation, self.vars[12], self.vars[13])?;
        Ok(ContrastiveForward {
            ex,
            ey,
            representation,
            logits,
        })
    }

    /// Symmetric InfoNCE over the batch: matching rows are positives, every
    /// other row in the batch a negative.
    pub fn info_nce(&self, ex: Var<'t>, ey: Var<'t>) -> Result<Var<'t>> {
        let tape = ex.tape();
        let b = ex.shape()[0];
        let nx = tape.row_normalize(ex)?;
        let ny = tape.row_normalize(ey)?;
        let sim = tape.scale(tape.matmul(nx, tape.transpose(ny)?)?, 1.0 / self.config.temperature);
        let eye: Vec<f64> = (0..b * b).map(|i| if i % (b + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let rows = tape.mul_const(tape.log_softmax_rows(sim)?, eye.clone())?.sum();
        let cols = tape.mul_const(tape.log_softmax_rows(tape.transpose(sim)?)?, eye)?.sum();
        Ok(tape.scale(tape.add(rows, cols)?, -0.5 / b as f64))
    }
}
