use overlap_autodiff::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::ode::{integrate, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum EntangleMode {
    /// Dense kernel on the `d1·d2` outer product.
    Full,
    /// `z_k = Σ_r (x·u_r)(y·v_r) core[r,k]`; never forms the outer product.
    Tucker { rank: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d1: usize,
    pub d2: usize,
    /// Latent dimension `D`.
    pub latent: usize,
    /// Width of both hidden layers of the vector field.
    pub hidden: usize,
    pub entangle: EntangleMode,
    /// Permits a Tucker rank below [`tucker_min_rank`].
    #[serde(default)]
    pub allow_low_rank: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d1: 64,
            d2: 64,
            latent: 96,
            hidden: 256,
            entangle: EntangleMode::Full,
            allow_low_rank: false,
        }
    }
}

/// Smallest Tucker rank accepted without an override,
/// `ceil(0.25 · min(d1, d2)²)`.
pub fn tucker_min_rank(d1: usize, d2: usize) -> usize {
    let m = d1.min(d2);
    (m * m).div_ceil(4)
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.latent == 0 || self.hidden == 0 {
            return Err(NetError::Parameter("model dimensions must be positive".into()));
        }
        if let EntangleMode::Tucker { rank } = self.entangle {
            let min = tucker_min_rank(self.d1, self.d2);
            if rank == 0 || (rank < min && !self.allow_low_rank) {
                return Err(NetError::Parameter(format!(
                    "Tucker rank {rank} is below the minimum {min}; set allow_low_rank to override"
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (d, h) = (self.latent, self.hidden);
        let kernel = match self.entangle {
            EntangleMode::Full => self.d1 * self.d2 * d,
            EntangleMode::Tucker { rank } => (self.d1 + self.d2 + d) * rank,
        };
        kernel + (d + 1) * h + h + h * h + h + h * d + d + d + 1
    }
}

/// Entanglement kernel, vector-field MLP and linear task head.
///
/// Tensors are kept in a fixed order (see [`ModelParams::names`]) that
/// checkpoints and optimisers rely on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    tensors: Vec<Tensor>,
}

fn gaussian(rng: &mut ChaCha8Rng, shape: &[usize], sd: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d1, d2, d, h) = (config.d1, config.d2, config.latent, config.hidden);
        let mut tensors = match config.entangle {
            EntangleMode::Full => {
                vec![gaussian(&mut rng, &[d1 * d2, d], 1.0 / ((d1 * d2) as f64).sqrt())]
            }
            EntangleMode::Tucker { rank } => vec![
                gaussian(&mut rng, &[d1, rank], 1.0 / (d1 as f64).sqrt()),
                gaussian(&mut rng, &[d2, rank], 1.0 / (d2 as f64).sqrt()),
                gaussian(&mut rng, &[rank, d], 1.0 / (rank as f64).sqrt()),
            ],
        };
        tensors.extend([
            gaussian(&mut rng, &[d + 1, h], 1.0 / ((d + 1) as f64).sqrt()),
            Tensor::zeros(&[h]),
            gaussian(&mut rng, &[h, h], 1.0 / (h as f64).sqrt()),
            Tensor::zeros(&[h]),
            gaussian(&mut rng, &[h, d], 0.1 / (h as f64).sqrt()),
            Tensor::zeros(&[d]),
            gaussian(&mut rng, &[d, 1], 1.0 / (d as f64).sqrt()),
            Tensor::zeros(&[1]),
        ]);
        Ok(Self { config, tensors })
    }

    /// Rebuilds parameters from tensors in [`ModelParams::names`] order.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let template = Self::shapes(&config);
        if tensors.len() != template.len()
            || tensors.iter().zip(&template).any(|(t, s)| t.shape() != s.as_slice())
        {
            return Err(NetError::Dimension("tensor shapes do not match the config".into()));
        }
        if tensors.iter().any(|t| !t.is_finite()) {
            return Err(NetError::Parameter("non-finite parameter".into()));
        }
        Ok(Self { config, tensors })
    }

    pub fn shapes(config: &ModelConfig) -> Vec<Vec<usize>> {
        let (d1, d2, d, h) = (config.d1, config.d2, config.latent, config.hidden);
        let mut s = match config.entangle {
            EntangleMode::Full => vec![vec![d1 * d2, d]],
            EntangleMode::Tucker { rank } => vec![vec![d1, rank], vec![d2, rank], vec![rank, d]],
        };
        s.extend([
            vec![d + 1, h],
            vec![h],
            vec![h, h],
            vec![h],
            vec![h, d],
            vec![d],
            vec![d, 1],
            vec![1],
        ]);
        s
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut n = match self.config.entangle {
            EntangleMode::Full => vec!["entangle.w"],
            EntangleMode::Tucker { .. } => vec!["entangle.u", "entangle.v", "entangle.core"],
        };
        n.extend([
            "field.w1", "field.b1", "field.w2", "field.b2", "field.w3", "field.b3", "head.w",
            "head.b",
        ]);
        n
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

    /// Records every tensor on `tape`, as trainable leaves or constants.
    pub fn on_tape<'t>(&self, tape: &'t Tape, trainable: bool) -> ModelVars<'t> {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        ModelVars {
            config: self.config,
            vars,
        }
    }
}

/// Model tensors recorded on a tape.
pub struct ModelVars<'t> {
    pub config: ModelConfig,
    pub vars: Vec<Var<'t>>,
}

/// Output of [`ModelVars::forward`].
pub struct Forward<'t> {
    pub z0: Var<'t>,
    /// States at every grid time, `z0` first.
    pub trajectory: Vec<Var<'t>>,
    pub zt: Var<'t>,
    /// `[batch, 1]` task logits read from `zt`.
    pub logits: Var<'t>,
    pub evaluations: usize,
}

impl<'t> ModelVars<'t> {
    fn kernel_len(&self) -> usize {
        match self.config.entangle {
            EntangleMode::Full => 1,
            EntangleMode::Tucker { .. } => 3,
        }
    }

    fn field_vars(&self) -> &[Var<'t>] {
        let k = self.kernel_len();
        &self.vars[k..k + 6]
    }

    /// `z0 = W(x ⊗ y)` for `[batch, d1]` and `[batch, d2]` inputs.
    pub fn entangle(&self, x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
        let tape = x.tape();
        let (xs, ys) = (x.shape(), y.shape());
        if xs.len() != 2
            || ys.len() != 2
            || xs[0] != ys[0]
            || xs[1] != self.config.d1
            || ys[1] != self.config.d2
        {
            return Err(NetError::Dimension(format!(
                "entangle expects [b,{}] and [b,{}], got {xs:?} and {ys:?}",
                self.config.d1, self.config.d2
            )));
        }
        Ok(match self.config.entangle {
            EntangleMode::Full => tape.matmul(tape.outer(x, y)?, self.vars[0])?,
            EntangleMode::Tucker { .. } => {
                let xu = tape.matmul(x, self.vars[0])?;
                let yv = tape.matmul(y, self.vars[1])?;
                tape.matmul(tape.mul(xu, yv)?, self.vars[2])?
            }
        })
    }

    /// Vector field `f(z, t)`: `[z, t] → SiLU → SiLU → D`.
    pub fn field(&self, z: Var<'t>, t: f64) -> Result<Var<'t>> {
        let tape = z.tape();
        let rows = z.shape()[0];
        let tcol = tape.constant(Tensor::matrix(rows, 1, vec![t; rows])?);
        let f = self.field_vars();
        let h = tape.affine(tape.concat(z, tcol)?, f[0], f[1])?.silu();
        let h = tape.affine(h, f[2], f[3])?.silu();
        Ok(tape.affine(h, f[4], f[5])?)
    }

    pub fn head(&self, z: Var<'t>) -> Result<Var<'t>> {
        let n = self.vars.len();
        Ok(z.tape().affine(z, self.vars[n - 2], self.vars[n - 1])?)
    }

    pub fn forward(&self, x: Var<'t>, y: Var<'t>, grid: &[f64], solver: Solver) -> Result<Forward<'t>> {
        let tape = x.tape();
        let z0 = self.entangle(x, y)?;
        let sol = integrate(tape, z0, grid, solver, |z, t| self.field(z, t))?;
        let zt = sol.last();
        let logits = self.head(zt)?;
        Ok(Forward {
            z0,
            trajectory: sol.trajectory,
            zt,
            logits,
            evaluations: sol.evaluations,
        })
    }
}

/// Values of one forward pass without gradients.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub z0: Tensor,
    pub trajectory: Vec<Tensor>,
    pub zt: Tensor,
    pub logits: Vec<f64>,
}

impl ModelParams {
    pub fn embed(&self, x: &Tensor, y: &Tensor, grid: &[f64], solver: Solver) -> Result<Embedding> {
        let tape = Tape::new();
        let mv = self.on_tape(&tape, false);
        let fwd = mv.forward(tape.constant(x.clone()), tape.constant(y.clone()), grid, solver)?;
        let trajectory: Vec<Tensor> = fwd.trajectory.iter().map(|v| v.value().clone()).collect();
        let logits = fwd.logits.value().data().to_vec();
        let z0 = fwd.z0.value().clone();
        Ok(Embedding {
            z0,
            zt: trajectory.last().expect("non-empty").clone(),
            trajectory,
            logits,
        })
    }
}
