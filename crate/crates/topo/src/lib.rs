//! Persistent homology for point clouds.
//!
//! Vietoris-Rips, lazy witness and distance-to-measure filtrations, Z/2
//! column reduction, persistence diagrams with critical-edge tags for
//! gradients, bottleneck distance and the normalised trajectory alignment
//! score built on it.

mod bottleneck;
mod cloud;
mod cohomology;
mod diagram;
mod error;
mod filtration;
mod gradient;
mod reduction;
mod witness;

pub use bottleneck::{
    bottleneck, bottleneck_distance, bottleneck_finite, tsas, tsas_from_diagrams, Bottleneck,
};
pub use cloud::PointCloud;
pub use diagram::{
    compute_persistence, compute_persistence_with, rips_persistence, Feature, PersistenceDiagram,
};
pub use error::{Result, TopoError};
pub use filtration::{
    dtm_filtration, dtm_values, rips_filtration, Filtration, FiltrationKind, Simplex,
    MAX_POINTS_DIM1, MAX_POINTS_DIM2, MAX_SIMPLICES,
};
pub use gradient::{active_features, diagram_gradients, EPS_MIN};
pub use reduction::{reduce, Pairing, Reduction};
pub use witness::{maxmin_landmarks, witness_filtration};
