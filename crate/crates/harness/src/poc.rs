use std::fmt;

use overlap_synth::{generate, transfer_pair};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{Condition, ExperimentConfig};
use crate::error::Result;
use crate::train::{run_condition, RunOutcome, Split, TaskData};

/// Significance level of the gate test.
pub const GATE_ALPHA: f64 = 0.05;
/// Seeds below which the comparison is flagged as underpowered.
pub const MIN_POC_SEEDS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub sd: f64,
    pub values: Vec<f64>,
}

impl MeanSd {
    pub fn of(values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, sd, values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Gate {
    Proceed,
    Terminate,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::Proceed => "PROCEED",
            Gate::Terminate => "TERMINATE",
        })
    }
}

/// One-sided paired t-test of `mean(a − b) > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: Option<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// With fewer than two pairs nothing can be shown and `p = 1`. With zero
/// spread in the differences the test degenerates to the sign of their
/// mean.
pub fn paired_one_sided(a: &[f64], b: &[f64], alpha: f64) -> PairedTest {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = MeanSd::of(diffs);
    let n = s.values.len();
    let (t, p) = if n < 2 {
        (None, 1.0)
    } else if s.sd == 0.0 {
        (None, if s.mean > 0.0 { 0.0 } else { 1.0 })
    } else {
        let t = s.mean / (s.sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        (Some(t), 1.0 - dist.cdf(t))
    };
    PairedTest {
        n,
        mean_diff: if n == 0 { 0.0 } else { s.mean },
        sd_diff: s.sd,
        t,
        p_value: p,
        alpha,
        significant: p < alpha,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub seed: u64,
    pub param_count: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub aborted: Option<String>,
    pub log_rows: usize,
    pub val_accuracy: Option<f64>,
    pub transfer_accuracy: Option<f64>,
    pub tau: Option<f64>,
    pub ns: Option<f64>,
    pub beta1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub letter: String,
    pub param_count: usize,
    pub runs: usize,
    pub aborted: usize,
    pub val_accuracy: MeanSd,
    pub transfer_accuracy: MeanSd,
    pub tau: MeanSd,
    pub ns: MeanSd,
    pub beta1: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub expected: String,
    /// Conditions by decreasing mean transfer accuracy.
    pub observed: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub train_families: Vec<String>,
    pub novel_families: Vec<String>,
    pub capacity: Vec<(Condition, usize, f64)>,
    pub runs: Vec<RunRecord>,
    pub conditions: Vec<ConditionSummary>,
    /// uoo − contrastive on transfer accuracy.
    pub gate_test: Option<PairedTest>,
    /// uoo − contrastive on τ, reported alongside the gate.
    pub tau_test: Option<PairedTest>,
    pub gate: Option<Gate>,
    pub withheld: Option<String>,
    pub ordering: Option<OrderingCheck>,
    pub warnings: Vec<String>,
}

pub struct PocOutcome {
    pub report: PocReport,
    pub runs: Vec<RunOutcome>,
}

fn record(out: &RunOutcome, transfer: Option<f64>) -> RunRecord {
    let e = out.final_eval.as_ref();
    RunRecord {
        condition: out.condition,
        seed: out.seed,
        param_count: out.param_count,
        epochs_run: out.epochs_run,
        stopped_early: out.stopped_early,
        aborted: out.aborted.clone(),
        log_rows: out.log.len(),
        val_accuracy: e.map(|e| e.accuracy),
        transfer_accuracy: transfer,
        tau: e.map(|e| e.tau),
        ns: e.map(|e| e.ns_mean),
        beta1: e.map(|e| e.beta1),
    }
}

fn column(records: &[&RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> MeanSd {
    MeanSd::of(records.iter().filter_map(|r| f(r)).collect())
}

/// Trains every condition for every seed on that seed's training family,
/// then evaluates the frozen models on the paired unseen family.
///
/// Runs are independent jobs spread over the current rayon pool; results
/// are merged in `(seed, condition)` order so the report does not depend on
/// scheduling.
pub fn run_poc(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<PocOutcome> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if seeds.len() < MIN_POC_SEEDS {
        warnings.push(format!(
            "{} seed(s) given; the paired test needs at least {MIN_POC_SEEDS} to have power",
            seeds.len()
        ));
    }
    let families: Vec<(String, String)> = seeds.iter().map(|&s| transfer_pair(s)).collect();
    let data: Vec<(TaskData, Split)> = seeds
        .par_iter()
        .zip(&families)
        .map(|(&s, (train, novel))| -> Result<_> {
            let d = TaskData::generate(cfg, train, s)?;
            let novel = Split::from_dataset(&generate(novel, cfg.transfer_n, s ^ 0x6e6f_7665_6c, cfg.entanglement)?)?;
            Ok((d, novel))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, Condition)> = (0..seeds.len())
        .flat_map(|i| Condition::ALL.into_iter().map(move |c| (i, c)))
        .collect();
    let results: Vec<(RunOutcome, Option<f64>)> = jobs
        .par_iter()
        .map(|&(i, c)| -> Result<_> {
            let run_cfg = cfg.with_condition(c);
            let out = run_condition(&run_cfg, seeds[i], &data[i].0)?;
            let transfer = match out.aborted {
                None => Some(out.model.accuracy(&data[i].1, &run_cfg)?),
                Some(_) => None,
            };
            Ok((out, transfer))
        })
        .collect::<Result<_>>()?;

    let records: Vec<RunRecord> = results.iter().map(|(o, t)| record(o, *t)).collect();
    let conditions: Vec<ConditionSummary> = Condition::ALL
        .iter()
        .map(|&c| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.condition == c).collect();
            ConditionSummary {
                condition: c,
                letter: format!("({})", c.letter()),
                param_count: cfg.param_count(c),
                runs: rs.len(),
                aborted: rs.iter().filter(|r| r.aborted.is_some()).count(),
                val_accuracy: column(&rs, |r| r.val_accuracy),
                transfer_accuracy: column(&rs, |r| r.transfer_accuracy),
                tau: column(&rs, |r| r.tau),
                ns: column(&rs, |r| r.ns),
                beta1: column(&rs, |r| r.beta1),
            }
        })
        .collect();

    let aborted: Vec<String> = records
        .iter()
        .filter(|r| r.aborted.is_some())
        .map(|r| format!("{} seed {}", r.condition, r.seed))
        .collect();
    let per_seed = |c: Condition, f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
        seeds
            .iter()
            .filter_map(|&s| records.iter().find(|r| r.condition == c && r.seed == s).and_then(f))
            .collect()
    };
    let (gate, gate_test, tau_test, ordering, withheld) = if aborted.is_empty() {
        let gt = paired_one_sided(
            &per_seed(Condition::Uoo, |r| r.transfer_accuracy),
            &per_seed(Condition::Contrastive, |r| r.transfer_accuracy),
            GATE_ALPHA,
        );
        let tt = paired_one_sided(
            &per_seed(Condition::Uoo, |r| r.tau),
            &per_seed(Condition::Contrastive, |r| r.tau),
            GATE_ALPHA,
        );
        let gate = if gt.significant { Gate::Proceed } else { Gate::Terminate };
        let mut ranked: Vec<&ConditionSummary> = conditions.iter().collect();
        ranked.sort_by(|a, b| b.transfer_accuracy.mean.total_cmp(&a.transfer_accuracy.mean));
        let mean = |c: Condition| conditions.iter().find(|s| s.condition == c).map(|s| s.transfer_accuracy.mean);
        let holds = matches!(
            (mean(Condition::Uoo), mean(Condition::OdeAblation), mean(Condition::Contrastive)),
            (Some(b), Some(c), Some(a)) if b > c && c > a
        );
        let observed = ranked.iter().map(|s| s.letter.clone()).collect::<Vec<_>>().join(" ≥ ");
        let ordering = OrderingCheck {
            expected: "(b) > (c) > (a)".into(),
            observed,
            holds,
        };
        (Some(gate), Some(gt), Some(tt), Some(ordering), None)
    } else {
        (None, None, None, None, Some(format!("aborted runs: {}", aborted.join(", "))))
    };

    let report = PocReport {
        config_hash: cfg.hash(),
        seeds: seeds.to_vec(),
        train_families: families.iter().map(|f| f.0.clone()).collect(),
        novel_families: families.iter().map(|f| f.1.clone()).collect(),
        capacity: cfg.capacity_gaps(),
        runs: records,
        conditions,
        gate_test,
        tau_test,
        gate,
        withheld,
        ordering,
        warnings,
    };
    Ok(PocOutcome {
        report,
        runs: results.into_iter().map(|(o, _)| o).collect(),
    })
}
