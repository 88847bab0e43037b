//! Bilinear entanglement into a latent state, a neural vector field
//! integrated on the tape, the persistence-based loss on the evolved batch,
//! and the separability diagnostics read off it.

mod checkpoint;
mod contrastive;
mod error;
mod health;
mod model;
mod ns;
mod ode;
mod schedule;
mod topo_loss;

pub use checkpoint::{load_tensors, save_tensors, sha256_hex, CheckpointMeta};
pub use contrastive::{
    ContrastiveConfig, ContrastiveForward, ContrastiveParams, ContrastiveVars, DEFAULT_EMBED,
    DEFAULT_TEMPERATURE,
};
pub use error::{NetError, Result};
pub use health::{
    gradient_health, GradientHealthLog, HEALTH_WINDOW, REMEDIATION_HINT, REMEDIATION_RATE,
    SPIKE_FACTOR,
};
pub use model::{
    tucker_min_rank, Embedding, EntangleMode, Forward, ModelConfig, ModelParams, ModelVars,
};
pub use ns::{ns_entropy, schmidt_weights, NsProjection};
pub use ode::{integrate, uniform_grid, OdeSolution, Solver, DOPRI_ATOL, DOPRI_RTOL, MIN_STEP};
pub use schedule::{AlphaSchedule, AlphaTracker, DecayMode, DEFAULT_ALPHA};
pub use topo_loss::{
    cloud_from, dual_gradient_distance, reference_gradient, structural_tension, tape_gradient,
    tension_of, topo_loss, topo_loss_value, total_loss, TopoLoss, TopoLossConfig, DEFAULT_LAMBDA,
    MIN_BATCH,
};
