use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Adam with bias correction and optional decoupled weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place. `grads[i]` must have the length of `params[i]`.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(AutodiffError::Invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(AutodiffError::Invalid("parameter list changed between steps".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() || self.m[k].len() != g.len() {
                return Err(AutodiffError::Invalid(format!("gradient {k} has wrong length")));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let step = (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                *w -= self.lr * (step + self.weight_decay * *w);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_a_quadratic() {
        let mut w = Tensor::vector(vec![3.0, -2.0]);
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g: Vec<f64> = w.data().iter().map(|x| 2.0 * (x - 1.0)).collect();
            opt.update(&mut [&mut w], &[g]).unwrap();
        }
        assert!(w.data().iter().all(|x| (x - 1.0).abs() < 1e-3));
    }

    #[test]
    fn first_step_has_size_lr() {
        let mut w = Tensor::vector(vec![0.0]);
        Adam::new(0.01).update(&mut [&mut w], &[vec![123.0]]).unwrap();
        assert!((w.data()[0] + 0.01).abs() < 1e-9);
    }
}
