use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use overlap_harness::{
    alpha_sweep, canonical_json, run_condition, run_poc, stress_test, write_json, write_run, write_text,
    Condition, ExperimentConfig, Histogram, MeanSd, RunOutcome, StressMode, StressOptions, TaskData,
    HISTOGRAM_BINS,
};
use overlap_net::AlphaSchedule;
use overlap_synth::{ceiling_report, generate};
use serde_json::json;

use crate::args::{GenArgs, ModeArg, PocArgs, RunArgs, StressArgs, SweepArgs};
use crate::error::{CmdResult, Failure};
use crate::manifest::{RunManifest, Status};
use crate::plot;

pub const SEED_ENV: &str = "OVERLAP_LAB_SEED";

/// What every command needs from the top-level flags.
pub struct Ctx {
    pub argv: Vec<String>,
    pub canonical: bool,
}

fn aborted_code() -> ExitCode {
    ExitCode::from(3)
}

/// Loads the config (or a preset) and applies flag overrides.
pub fn resolve(run: &RunArgs) -> CmdResult<ExperimentConfig> {
    let mut cfg = match &run.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::Usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::Usage)?
        }
        None if run.smoke => ExperimentConfig::smoke(),
        None => ExperimentConfig::default(),
    };
    if let Some(e) = run.epochs {
        cfg.epochs = e;
    }
    if let Some(n) = run.n {
        cfg.n = n;
    }
    if let Some(f) = &run.family {
        cfg.family = f.clone();
    }
    if let Some(e) = run.entanglement {
        cfg.entanglement = e;
    }
    Ok(cfg)
}

/// `--seeds`, then the seed environment variable, then the config.
pub fn resolve_seeds(flag: &[u64], cfg: &ExperimentConfig) -> CmdResult<Vec<u64>> {
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| vec![s])
            .with_context(|| format!("{SEED_ENV}={v:?} is not a seed"))
            .map_err(Failure::Usage),
        Err(_) => Ok(cfg.seeds.clone()),
    }
}

fn finish_err(m: &mut RunManifest, e: impl Into<Failure>) -> Failure {
    let f = e.into();
    let _ = m.finish(Status::Aborted);
    f
}

fn write_runs<'a>(
    dir: &Path,
    runs: impl IntoIterator<Item = (String, ExperimentConfig, &'a RunOutcome)>,
    plot_diagrams: bool,
    m: &mut RunManifest,
) -> CmdResult<()> {
    for (name, cfg, run) in runs {
        let run_dir = dir.join("runs").join(name);
        m.add_all(&write_run(&run_dir, &cfg, run)?);
        if let (true, Some(e)) = (plot_diagrams, &run.final_eval) {
            let title = format!("{} seed {} persistence", run.condition, run.seed);
            m.add(&write_text(&run_dir.join("diagram.svg"), &plot::diagram(&title, &e.diagram, cfg.max_dim))?);
        }
    }
    Ok(())
}

fn mean_sd(m: &MeanSd) -> String {
    format!("{:.4} ± {:.4}", m.mean, m.sd)
}

pub fn gen(args: &GenArgs, ctx: &Ctx) -> CmdResult<ExitCode> {
    let ds = generate(&args.family, args.n, args.seed, args.entanglement).map_err(Failure::usage)?;
    let header = ds.header();
    if args.dry_run {
        print!("{}", canonical_json(&header));
        return Ok(ExitCode::SUCCESS);
    }
    let out = &args.out;
    let mut m = RunManifest::start(out, ctx.argv.clone(), None, vec![args.seed], ctx.canonical)?;
    let io = |e: std::io::Error| Failure::usage(e);
    let bin = out.join("dataset.bin");
    ds.write_binary(BufWriter::new(File::create(&bin).map_err(io)?)).map_err(Failure::usage)?;
    let csv = out.join("dataset.csv");
    ds.write_csv(BufWriter::new(File::create(&csv).map_err(io)?)).map_err(Failure::usage)?;
    m.add_all(&[bin, csv]);
    m.add(&write_json(&out.join("header.json"), &header)?);
    if args.ceiling {
        let report = ceiling_report(&ds).map_err(|e| finish_err(&mut m, Failure::usage(e)))?;
        m.add(&write_json(&out.join("ceiling.json"), &report)?);
        println!("x_only={}", report.x_only);
        println!("y_only={}", report.y_only);
        println!("additive={}", report.additive);
        println!("separable_ceiling={}", report.ceiling);
    }
    m.finish(Status::Complete)?;
    println!("wrote {} rows of {} to {}", ds.len(), ds.family_id, out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn poc(args: &PocArgs, ctx: &Ctx) -> CmdResult<ExitCode> {
    let mut cfg = resolve(&args.run)?;
    let seeds = resolve_seeds(&args.seeds, &cfg)?;
    cfg.seeds = seeds.clone();
    cfg.validate()?;
    if args.run.dry_run {
        print!("{}", cfg.canonical());
        return Ok(ExitCode::SUCCESS);
    }
    let out = &args.run.out;
    let mut m = RunManifest::start(out, ctx.argv.clone(), Some(cfg.hash()), seeds.clone(), ctx.canonical)?;
    m.add(&write_json(&out.join("config.json"), &cfg)?);
    let poc = run_poc(&cfg, &seeds).map_err(|e| finish_err(&mut m, e))?;
    let report = &poc.report;
    m.add(&write_json(&out.join("report.json"), report)?);
    write_runs(
        out,
        poc.runs.iter().map(|r| {
            (format!("{}_seed{}", r.condition, r.seed), cfg.with_condition(r.condition), r)
        }),
        args.run.plot,
        &mut m,
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.conditions {
        println!(
            "{} {}: params {}, runs {} (aborted {}), val {}, transfer {}, tau {}, ns {}",
            c.letter,
            c.condition,
            c.param_count,
            c.runs,
            c.aborted,
            mean_sd(&c.val_accuracy),
            mean_sd(&c.transfer_accuracy),
            mean_sd(&c.tau),
            mean_sd(&c.ns)
        );
    }
    if let Some(t) = &report.gate_test {
        println!(
            "transfer uoo - contrastive: mean {:.4}, sd {:.4}, n {}, one-sided p {:.4}",
            t.mean_diff, t.sd_diff, t.n, t.p_value
        );
    }
    if let Some(o) = &report.ordering {
        println!("ordering expected {} observed {} holds={}", o.expected, o.observed, o.holds);
    }
    match (&report.withheld, report.gate) {
        (None, Some(gate)) => {
            m.finish(Status::Complete)?;
            println!("GATE={gate}");
            Ok(ExitCode::SUCCESS)
        }
        (reason, _) => {
            m.finish(Status::Aborted)?;
            eprintln!("gate withheld: {}", reason.as_deref().unwrap_or("no decision"));
            Ok(aborted_code())
        }
    }
}

pub fn sweep(args: &SweepArgs, ctx: &Ctx) -> CmdResult<ExitCode> {
    let mut cfg = resolve(&args.run)?.with_condition(Condition::Uoo);
    let seeds = resolve_seeds(&args.seeds, &cfg)?;
    cfg.seeds = seeds.clone();
    cfg.validate()?;
    if args.run.dry_run {
        print!("{}", canonical_json(&json!({ "alphas": args.alphas, "config": cfg })));
        return Ok(ExitCode::SUCCESS);
    }
    let out = &args.run.out;
    let mut m = RunManifest::start(out, ctx.argv.clone(), Some(cfg.hash()), seeds.clone(), ctx.canonical)?;
    m.add(&write_json(&out.join("config.json"), &cfg)?);
    let sweep = alpha_sweep(&cfg, &args.alphas, &seeds).map_err(|e| finish_err(&mut m, e))?;
    let report = &sweep.report;
    m.add(&write_json(&out.join("sweep.json"), report)?);
    write_runs(
        out,
        sweep.runs.iter().map(|(alpha, r)| {
            let run_cfg = ExperimentConfig {
                alpha: AlphaSchedule::constant(*alpha),
                ..cfg.clone()
            };
            (format!("alpha_{alpha}_seed{}", r.seed), run_cfg, r)
        }),
        args.run.plot,
        &mut m,
    )?;
    let thresholds = report.thresholds.as_ref();
    if args.run.plot {
        let pooled: Vec<f64> = report.points.iter().flat_map(|p| p.ns.iter().copied()).collect();
        let hi = (cfg.ns_shape.0.min(cfg.ns_shape.1) as f64).ln();
        let hist = Histogram::new(&pooled, 0.0, hi, HISTOGRAM_BINS);
        let k1 = thresholds.and_then(|t| t.kappa_star).map(|k| (k, "κ*"));
        let svg = plot::histogram("NS over the sweep", "NS", &hist.edges, &hist.density, k1);
        m.add(&write_text(&out.join("ns_histogram.svg"), &svg)?);
        let k2 = report.c_proxy.map(|k| (k, "κ**"));
        let svg = plot::scatter("τ against NS", "NS", "τ", &report.ns_tau_pairs, k2);
        m.add(&write_text(&out.join("tau_vs_ns.svg"), &svg)?);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut aborted = 0;
    for p in &report.points {
        aborted += p.runs_aborted;
        println!(
            "alpha={} ok={} aborted={} tau {} quality {}",
            p.alpha,
            p.runs_ok,
            p.runs_aborted,
            mean_sd(&p.tau),
            mean_sd(&p.quality)
        );
    }
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |k| k.to_string());
    println!(
        "signature={} kappa_star={} kappa_star_star={}",
        serde_json::to_value(report.signature).map_err(Failure::aborted)?.as_str().unwrap_or_default(),
        fmt(thresholds.and_then(|t| t.kappa_star)),
        fmt(report.c_proxy)
    );
    if aborted > 0 {
        m.finish(Status::Aborted)?;
        eprintln!("{aborted} run(s) aborted");
        return Ok(aborted_code());
    }
    m.finish(Status::Complete)?;
    Ok(ExitCode::SUCCESS)
}

pub fn stress(args: &StressArgs, ctx: &Ctx) -> CmdResult<ExitCode> {
    let mut cfg = resolve(&args.run)?.with_condition(Condition::Uoo);
    cfg.seeds = vec![args.seed];
    cfg.validate()?;
    let mut opts = StressOptions::default();
    if let Some(e) = args.stress_epochs {
        opts.epochs = e;
    }
    if !args.shifts.is_empty() {
        opts.shifts = args.shifts.clone();
    }
    let modes: Vec<StressMode> = match args.mode {
        ModeArg::All => StressMode::ALL.to_vec(),
        ModeArg::AlphaDecay => vec![StressMode::AlphaDecay],
        ModeArg::Ood => vec![StressMode::Ood],
        ModeArg::OverEntangle => vec![StressMode::OverEntangle],
    };
    if args.run.dry_run {
        let names: Vec<&str> = modes.iter().map(|m| m.name()).collect();
        print!("{}", canonical_json(&json!({ "config": cfg, "modes": names, "options": opts, "seed": args.seed })));
        return Ok(ExitCode::SUCCESS);
    }
    let out = &args.run.out;
    let mut m = RunManifest::start(out, ctx.argv.clone(), Some(cfg.hash()), vec![args.seed], ctx.canonical)?;
    m.add(&write_json(&out.join("config.json"), &cfg)?);
    let ds = generate(&cfg.family, cfg.n, args.seed, cfg.entanglement)
        .map_err(|e| finish_err(&mut m, Failure::usage(e)))?;
    let data = TaskData::from_dataset(&ds, cfg.val_fraction).map_err(|e| finish_err(&mut m, e))?;
    let trained = run_condition(&cfg, args.seed, &data).map_err(|e| finish_err(&mut m, e))?;
    write_runs(out, [("trained".to_string(), cfg.clone(), &trained)], args.run.plot, &mut m)?;
    if let Some(reason) = &trained.aborted {
        m.finish(Status::Aborted)?;
        eprintln!("training aborted: {reason}");
        return Ok(aborted_code());
    }
    let mut any_aborted = false;
    for mode in modes {
        let r = stress_test(&cfg, args.seed, &trained.model, &ds, mode, &opts).map_err(|e| finish_err(&mut m, e))?;
        let name = mode.name();
        m.add(&write_json(&out.join(format!("stress_{name}.json")), &r)?);
        if args.run.plot {
            let points: Vec<(f64, f64)> = r.checkpoints.iter().map(|c| (c.at, c.ns)).collect();
            let xlabel = if mode == StressMode::Ood { "shift" } else { "epoch" };
            let svg = plot::scatter(&format!("{name}: NS"), xlabel, "NS", &points, None);
            m.add(&write_text(&out.join(format!("stress_{name}.svg")), &svg)?);
        }
        let fmt = |v: Option<f64>| v.map_or("none".to_string(), |k| format!("{k:.4}"));
        println!(
            "{name}: ns {:.4} -> {:.4} reduced={} collapse={} corr(ns, quality)={} corr(beta1, quality)={}",
            r.ns_initial,
            r.ns_final,
            r.ns_reduced,
            r.collapse,
            fmt(r.ns_quality_correlation),
            fmt(r.beta1_quality_correlation)
        );
        if let Some(reason) = &r.aborted {
            any_aborted = true;
            eprintln!("{name} aborted: {reason}");
        }
    }
    if any_aborted {
        m.finish(Status::Aborted)?;
        return Ok(aborted_code());
    }
    m.finish(Status::Complete)?;
    Ok(ExitCode::SUCCESS)
}
