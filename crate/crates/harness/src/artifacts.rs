use std::path::{Path, PathBuf};

use overlap_autodiff::Tensor;
use overlap_net::save_tensors;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{write_json, write_text};
use crate::train::{RunOutcome, TrainedModel};

#[derive(Serialize)]
struct RunSummary<'a> {
    condition: String,
    seed: u64,
    param_count: usize,
    epochs_run: usize,
    stopped_early: bool,
    aborted: &'a Option<String>,
    val_history: &'a [f64],
    alpha_history: &'a [f64],
    val_accuracy: Option<f64>,
    tau: Option<f64>,
    ns: Option<f64>,
    beta1: Option<f64>,
    grad_flags: usize,
    remediation_step: Option<usize>,
}

pub fn tensor_csv(t: &Tensor) -> String {
    let mut out = String::new();
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes one run directory: `config.json`, `metrics.csv`, the logged
/// batch representations with their diagrams, the final diagram, a model
/// checkpoint and `report.json`. Returns every path written.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &RunOutcome) -> Result<Vec<PathBuf>> {
    let mut paths = vec![write_json(&dir.join("config.json"), cfg)?];
    paths.push(write_text(&dir.join("metrics.csv"), &out.log.to_csv())?);
    for (row, rep) in out.log.rows().iter().zip(&out.snapshots) {
        let stem = format!("step_{:06}", row.step);
        paths.push(write_text(&dir.join("representations").join(format!("{stem}.csv")), &tensor_csv(rep))?);
        let (_, pd) = overlap_net::tension_of(rep)?;
        paths.push(write_text(&dir.join("diagrams").join(format!("{stem}.csv")), &pd.to_csv())?);
    }
    if let Some(e) = &out.final_eval {
        paths.push(write_text(&dir.join("diagrams").join("final.csv"), &e.diagram.to_csv())?);
    }
    let (names, model): (Vec<&str>, serde_json::Value) = match &out.model {
        TrainedModel::Ode(p) => (p.names(), serde_json::to_value(p.config)?),
        TrainedModel::Contrastive(p) => (p.names(), serde_json::to_value(p.config)?),
    };
    let (bin, json) = save_tensors(&dir.join("model"), &names, out.model.tensors(), out.seed, &cfg.hash(), model)?;
    paths.extend([bin, json]);
    let e = out.final_eval.as_ref();
    let summary = RunSummary {
        condition: out.condition.to_string(),
        seed: out.seed,
        param_count: out.param_count,
        epochs_run: out.epochs_run,
        stopped_early: out.stopped_early,
        aborted: &out.aborted,
        val_history: &out.val_history,
        alpha_history: &out.alpha_history,
        val_accuracy: e.map(|e| e.accuracy),
        tau: e.map(|e| e.tau),
        ns: e.map(|e| e.ns_mean),
        beta1: e.map(|e| e.beta1),
        grad_flags: out.health.flag_count(),
        remediation_step: out.health.remediation_step,
    };
    paths.push(write_json(&dir.join("report.json"), &summary)?);
    Ok(paths)
}
