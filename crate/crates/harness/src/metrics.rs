use serde::{Deserialize, Serialize};

use crate::io::csv_float;

/// One logged training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    /// Zero-based index of the optimiser step; rows fall on multiples of
    /// the logging interval.
    pub step: usize,
    pub alpha: f64,
    pub task_loss: f64,
    /// Absent when α = 0 and the topological term was never built.
    pub topo_loss: Option<f64>,
    pub total_loss: f64,
    pub tau: f64,
    /// Mean NS over the batch.
    pub ns: f64,
    pub beta1: f64,
    /// `‖∇_{z(T)} L_topo‖₂` of this step, when the term was built.
    pub grad_norm: Option<f64>,
    pub flags: Vec<String>,
}

/// Append-only training log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    rows: Vec<MetricsRow>,
}

pub const METRICS_HEADER: &str =
    "epoch,step,alpha,task_loss,topo_loss,total_loss,tau,ns,beta1,grad_norm,flags";

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.step,
                r.alpha,
                r.task_loss,
                csv_float(r.topo_loss),
                r.total_loss,
                r.tau,
                r.ns,
                r.beta1,
                csv_float(r.grad_norm),
                r.flags.join(";"),
            ));
        }
        out
    }
}
