use std::path::Path;
use std::process::ExitCode;

use overlap_harness::{canonical_json, write_text};
use overlap_stats::{default_penalty, dip_test_with, etr, gmm2_bic, pelt, tost, tost_sample_size};
use overlap_topo::{
    bottleneck, compute_persistence, dtm_filtration, rips_persistence, tsas, witness_filtration, FiltrationKind,
    PersistenceDiagram, PointCloud,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{FiltrationArg, StatsCommand, TopoCommand};
use crate::commands::Ctx;
use crate::error::{CmdResult, Failure};
use crate::input::{read_rows, read_text, read_values};
use crate::manifest::{RunManifest, Status};
use crate::plot;

/// Report sink: canonical JSON on stdout, plus `report.json` and a
/// manifest when an output directory was given.
struct Sink {
    manifest: Option<(RunManifest, std::path::PathBuf)>,
}

impl Sink {
    fn open(out: Option<&Path>, ctx: &Ctx, seeds: Vec<u64>) -> CmdResult<Self> {
        let manifest = match out {
            Some(dir) => Some((RunManifest::start(dir, ctx.argv.clone(), None, seeds, ctx.canonical)?, dir.to_path_buf())),
            None => None,
        };
        Ok(Self { manifest })
    }

    fn file(&mut self, name: &str, text: &str) -> CmdResult<()> {
        if let Some((m, dir)) = &mut self.manifest {
            m.add(&write_text(&dir.join(name), text)?);
        }
        Ok(())
    }

    fn fail(&mut self, e: impl Into<anyhow::Error>) -> Failure {
        if let Some((m, _)) = &mut self.manifest {
            let _ = m.finish(Status::Aborted);
        }
        Failure::aborted(e)
    }

    fn report<T: Serialize>(mut self, value: &T) -> CmdResult<ExitCode> {
        let text = canonical_json(value);
        self.file("report.json", &text)?;
        if let Some((m, _)) = &mut self.manifest {
            m.finish(Status::Complete)?;
        }
        print!("{text}");
        Ok(ExitCode::SUCCESS)
    }
}

pub fn stats(cmd: &StatsCommand, ctx: &Ctx) -> CmdResult<ExitCode> {
    match cmd {
        StatsCommand::Dip { file, seed, draws, out } => {
            let x = read_values(file)?;
            let mut sink = Sink::open(out.as_deref(), ctx, vec![*seed])?;
            let r = dip_test_with(&x, *seed, *draws).map_err(|e| sink.fail(e))?;
            sink.report(&json!({ "n": x.len(), "seed": seed, "draws": draws, "result": r }))
        }
        StatsCommand::Gmm { file, seed, out } => {
            let x = read_values(file)?;
            let mut sink = Sink::open(out.as_deref(), ctx, vec![*seed])?;
            let fit = gmm2_bic(&x, *seed).map_err(|e| sink.fail(e))?;
            let selected = if fit.bic2 < fit.bic1 { 2 } else { 1 };
            sink.report(&json!({ "n": x.len(), "seed": seed, "selected_components": selected, "fit": fit }))
        }
        StatsCommand::Pelt { file, penalty, out } => {
            let x = read_values(file)?;
            let mut sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let used = penalty.unwrap_or_else(|| default_penalty(&x));
            let cps = pelt(&x, Some(used)).map_err(|e| sink.fail(e))?;
            sink.report(&json!({ "n": x.len(), "penalty": used, "changepoints": cps }))
        }
        StatsCommand::Tost { a, b, delta, alpha, out } => {
            let (xa, xb) = (read_values(a)?, read_values(b)?);
            let mut sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let r = tost(&xa, &xb, *delta, *alpha).map_err(|e| sink.fail(e))?;
            let size = tost_sample_size(*delta, 0.8, *alpha).map_err(|e| sink.fail(e))?;
            let powered = xa.len().min(xb.len()) as u64 >= r.n_required;
            sink.report(&json!({
                "n_a": xa.len(),
                "n_b": xb.len(),
                "equivalent": r.equivalent,
                "adequately_powered": powered,
                "tost": r,
                "sample_size": size,
            }))
        }
        StatsCommand::Etr { p_b, p_c, p_d, out } => {
            let mut sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let v = etr(*p_b, *p_c, *p_d).map_err(|e| sink.fail(e))?;
            sink.report(&json!({ "p_b": p_b, "p_c": p_c, "p_d": p_d, "etr": v }))
        }
    }
}

fn cloud(path: &Path) -> CmdResult<PointCloud> {
    PointCloud::from_rows(&read_rows(path)?).map_err(Failure::usage)
}

fn diagram(path: &Path) -> CmdResult<PersistenceDiagram> {
    PersistenceDiagram::from_csv(FiltrationKind::Rips, &read_text(path)?).map_err(Failure::usage)
}

pub fn topo(cmd: &TopoCommand, ctx: &Ctx) -> CmdResult<ExitCode> {
    match cmd {
        TopoCommand::Persistence { file, max_dim, max_scale, filtration, k, out, plot: want_plot } => {
            let pc = cloud(file)?;
            let mut sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let pd = match filtration {
                FiltrationArg::Rips => rips_persistence(&pc, *max_dim, *max_scale),
                FiltrationArg::Witness => witness_filtration(&pc, *k).map(|f| compute_persistence(&f)),
                FiltrationArg::Dtm => dtm_filtration(&pc, *k, *max_dim).map(|f| compute_persistence(&f)),
            }
            .map_err(|e| sink.fail(e))?;
            sink.file("diagram.csv", &pd.to_csv())?;
            if *want_plot {
                sink.file("diagram.svg", &plot::diagram("persistence", &pd, *max_dim))?;
            }
            let totals: Vec<f64> = (0..=*max_dim).map(|d| pd.total_persistence(d)).collect();
            let counts: Vec<usize> = (0..=*max_dim).map(|d| pd.dim(d).count()).collect();
            sink.report(&json!({
                "points": pc.len(),
                "features": counts,
                "total_persistence": totals,
                "diagram": pd,
            }))
        }
        TopoCommand::Bottleneck { a, b, dim, out } => {
            let (da, db) = (diagram(a)?, diagram(b)?);
            let sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let r = bottleneck(&da, &db, *dim);
            let distance = r.distance.is_finite().then_some(r.distance);
            sink.report(&json!({ "dim": dim, "distance": distance, "infinite_mismatch": r.infinite_mismatch }))
        }
        TopoCommand::Tsas { a, b, out } => {
            let (ca, cb) = (cloud(a)?, cloud(b)?);
            let mut sink = Sink::open(out.as_deref(), ctx, vec![])?;
            let v = tsas(&ca, &cb).map_err(|e| sink.fail(e))?;
            sink.report(&json!({ "tsas": v }))
        }
    }
}
