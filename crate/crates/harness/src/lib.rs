//! Experiment pipelines: the three-condition comparison with its gate, the
//! α sweep with threshold detection, stress protocols and the equivalence
//! check on τ.

mod artifacts;
mod config;
mod error;
mod falsify;
mod io;
mod metrics;
mod pca;
mod poc;
mod stress;
mod sweep;
mod train;

pub use artifacts::{tensor_csv, write_run};
pub use config::*;
pub use error::{HarnessError, Result};
pub use falsify::{tost_falsification, FalsificationReport, FALSIFICATION_ALPHA, FALSIFICATION_DELTA};
pub use io::{canonical_json, csv_float, write_json, write_text};
pub use metrics::{MetricsLog, MetricsRow, METRICS_HEADER};
pub use pca::{symmetric_eigen, trajectory_to_cloud, TrajectoryCloud, TRAJECTORY_COMPONENTS};
pub use poc::*;
pub use stress::*;
pub use sweep::*;
pub use train::*;
