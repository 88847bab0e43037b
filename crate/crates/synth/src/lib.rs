//! Seeded two-modality datasets whose label is the XOR of one hidden bit
//! per modality, plus the probes used to bound what single-modality and
//! additive models can reach on them.

mod dataset;
mod error;
mod probe;

pub use dataset::{
    encoding, family_hash, generate, ood_variant, transfer_pair, DatasetHeader, Encoding, Latent,
    SyntheticDataset, DIM, FEATURE_NOISE, LABEL_NOISE, NUISANCE_DIMS, NUISANCE_SCALE,
    OOD_ANGLE_PER_UNIT,
};
pub use error::{Result, SynthError};
pub use probe::{
    accuracy, ceiling_report, joint_probe_accuracy, linear_probe_accuracy, separable_ceiling,
    CeilingReport, Modality, Probe, ProbeKind, BILINEAR_PROBE_RANK, MLP_PROBE_HIDDEN,
    PROBE_TRAIN_FRACTION,
};
