use overlap_autodiff::{Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

pub const DOPRI_ATOL: f64 = 1e-6;
pub const DOPRI_RTOL: f64 = 1e-4;
/// Adaptive steps smaller than this abort the solve.
pub const MIN_STEP: f64 = 1e-12;
const MAX_ADAPTIVE_STEPS: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Classic fourth-order Runge-Kutta, one step per grid interval.
    #[default]
    Rk4,
    /// Dormand-Prince 5(4) with error control, stopping at every grid time.
    Dopri,
}

/// States at every grid time (the first is `z0` itself) and the number of
/// vector-field evaluations spent.
pub struct OdeSolution<'t> {
    pub trajectory: Vec<Var<'t>>,
    pub evaluations: usize,
}

impl<'t> OdeSolution<'t> {
    pub fn last(&self) -> Var<'t> {
        *self.trajectory.last().expect("trajectory holds z0")
    }
}

/// `n + 1` evenly spaced times on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(NetError::Parameter("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(NetError::Parameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Integrates `dz/dt = field(z, t)` on the tape, so gradients flow through
/// every step taken.
pub fn integrate<'t, F>(
    tape: &'t Tape,
    z0: Var<'t>,
    grid: &[f64],
    solver: Solver,
    mut field: F,
) -> Result<OdeSolution<'t>>
where
    F: FnMut(Var<'t>, f64) -> Result<Var<'t>>,
{
    check_grid(grid)?;
    match solver {
        Solver::Rk4 => rk4(tape, z0, grid, &mut field),
        Solver::Dopri => dopri(tape, z0, grid, &mut field),
    }
}

fn rk4<'t>(
    tape: &'t Tape,
    z0: Var<'t>,
    grid: &[f64],
    field: &mut dyn FnMut(Var<'t>, f64) -> Result<Var<'t>>,
) -> Result<OdeSolution<'t>> {
    let mut z = z0;
    let mut trajectory = vec![z0];
    for w in grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let k1 = field(z, t)?;
        let k2 = field(tape.add_scaled(z, k1, h / 2.0)?, t + h / 2.0)?;
        let k3 = field(tape.add_scaled(z, k2, h / 2.0)?, t + h / 2.0)?;
        let k4 = field(tape.add_scaled(z, k3, h)?, t + h)?;
        let s = tape.add_scaled(k1, k2, 2.0)?;
        let s = tape.add_scaled(s, k3, 2.0)?;
        let s = tape.add(s, k4)?;
        z = tape.add_scaled(z, s, h / 6.0)?;
        trajectory.push(z);
    }
    Ok(OdeSolution {
        trajectory,
        evaluations: 4 * (grid.len() - 1),
    })
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri<'t>(
    tape: &'t Tape,
    z0: Var<'t>,
    grid: &[f64],
    field: &mut dyn FnMut(Var<'t>, f64) -> Result<Var<'t>>,
) -> Result<OdeSolution<'t>> {
    let mut z = z0;
    let mut trajectory = vec![z0];
    let mut evaluations = 0;
    let mut t = 0.0;
    let mut h = (grid[grid.len() - 1] / 10.0).min(grid.get(1).copied().unwrap_or(1.0));
    let mut k1 = None;
    let mut steps = 0;

    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if h < MIN_STEP || steps > MAX_ADAPTIVE_STEPS {
                return Err(NetError::Stiff { t, h });
            }
            let step = h.min(target - t);
            let first = match k1 {
                Some(k) => k,
                None => {
                    evaluations += 1;
                    field(z, t)?
                }
            };
            let mut k = vec![first];
            let mut z_new = z;
            for s in 1..7 {
                let mut arg = z;
                for (j, &a) in A[s].iter().enumerate() {
                    if a != 0.0 {
                        arg = tape.add_scaled(arg, k[j], step * a)?;
                    }
                }
                if s == 6 {
                    // the last stage is evaluated at the 5th-order solution
                    z_new = arg;
                }
                evaluations += 1;
                k.push(field(arg, t + C[s] * step)?);
            }
            let err = {
                let zv = z.value();
                let nv = z_new.value();
                let kv: Vec<_> = k.iter().map(|v| v.value()).collect();
                let mut acc = 0.0;
                for i in 0..zv.len() {
                    let e: f64 = (0..7).map(|s| E[s] * kv[s].data()[i]).sum::<f64>() * step;
                    let sc = DOPRI_ATOL
                        + DOPRI_RTOL * zv.data()[i].abs().max(nv.data()[i].abs());
                    acc += (e / sc).powi(2);
                }
                (acc / zv.len().max(1) as f64).sqrt()
            };
            let factor = if err.is_finite() {
                (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)
            } else {
                0.2
            };
            if err <= 1.0 {
                t = if step == target - t { target } else { t + step };
                z = z_new;
                k1 = Some(k[6]);
                if step == h || factor < 1.0 {
                    h *= factor;
                }
            } else {
                h = step * factor;
            }
        }
        trajectory.push(z);
    }
    Ok(OdeSolution {
        trajectory,
        evaluations,
    })
}
