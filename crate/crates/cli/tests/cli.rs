use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlap-lab"))
        .current_dir(dir)
        .env_remove("OVERLAP_LAB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_files_with_an_echoing_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["gen", "--family", "xor64", "--n", "1000", "--seed", "7", "--out", "d"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = dir.path().join("d");
    for f in ["dataset.bin", "dataset.csv", "header.json", "manifest.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let h = json(&d.join("header.json"));
    assert_eq!(h["family_id"], "xor64");
    assert_eq!(h["n"], 1000);
    assert_eq!(h["seed"], 7);
    assert_eq!(h["entanglement"], 0.0);
    let m = json(&d.join("manifest.json"));
    assert_eq!(m["status"], "complete");
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 4);
    assert!(m["started"].is_u64());
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(code(&lab(dir.path(), &["gen", "--n", "300", "--seed", "3", "--out", out])), 0);
    }
    for f in ["dataset.bin", "dataset.csv", "header.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn gen_rejects_out_of_range_entanglement() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["gen", "--entanglement", "1.5", "--out", "d"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("d").exists());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_overlap-lab"))
        .current_dir(dir.path())
        .env("OVERLAP_LAB_SEED", "11")
        .args(["gen", "--n", "50", "--dry-run"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let h: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(h["seed"], 11);
}

#[test]
fn ceiling_is_printed_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["gen", "--n", "400", "--out", "d", "--ceiling"]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o).lines().find(|l| l.starts_with("separable_ceiling=")).map(String::from).unwrap();
    let v: f64 = line["separable_ceiling=".len()..].parse().unwrap();
    assert!((0.0..=1.0).contains(&v));
    assert!(dir.path().join("d/ceiling.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lab(dir.path(), &["poc", "--bogus"])), 2);
    assert_eq!(code(&lab(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&lab(dir.path(), &["--jobs", "0", "poc", "--smoke", "--dry-run"])), 2);
    assert_eq!(code(&lab(dir.path(), &["poc", "--config", "missing.json"])), 2);
    fs::write(dir.path().join("bad.json"), r#"{"epochs": 2, "colour": "red"}"#).unwrap();
    assert_eq!(code(&lab(dir.path(), &["poc", "--config", "bad.json"])), 2);
    fs::write(dir.path().join("zero.json"), r#"{"epochs": 0}"#).unwrap();
    assert_eq!(code(&lab(dir.path(), &["poc", "--config", "zero.json"])), 2);
    assert_eq!(code(&lab(dir.path(), &["stats", "pelt", "missing.csv"])), 2);
    assert_eq!(code(&lab(dir.path(), &["poc", "--smoke", "--config", "zero.json"])), 2);
}

#[test]
fn help_exits_0_on_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        vec!["--help"],
        vec!["gen", "--help"],
        vec!["poc", "--help"],
        vec!["sweep", "--help"],
        vec!["stress", "--help"],
        vec!["stats", "tost", "--help"],
        vec!["topo", "persistence", "--help"],
    ] {
        let o = lab(dir.path(), &sub);
        assert_eq!(code(&o), 0, "{sub:?}");
        assert!(stdout(&o).contains("Usage"));
    }
}

#[test]
fn dry_run_prints_the_config_and_trains_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["poc", "--smoke", "--epochs", "3", "--dry-run", "--out", "p"]);
    assert_eq!(code(&o), 0);
    let cfg: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cfg["epochs"], 3);
    assert_eq!(cfg["n"], 256);
    assert!(!dir.path().join("p").exists());
}

#[test]
fn smoke_poc_ends_with_one_gate_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["poc", "--smoke", "--out", "p", "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let gates: Vec<&str> = out.lines().filter(|l| l.starts_with("GATE=")).collect();
    assert_eq!(gates.len(), 1);
    let last = out.lines().last().unwrap();
    assert!(last == "GATE=PROCEED" || last == "GATE=TERMINATE", "{last}");
    let p = dir.path().join("p");
    let report = json(&p.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 3);
    let m = json(&p.join("manifest.json"));
    for a in m["artifacts"].as_array().unwrap() {
        assert!(p.join(a.as_str().unwrap()).exists(), "{a}");
    }
    assert!(p.join("runs/uoo_seed0/diagram.svg").exists());
    assert!(p.join("runs/contrastive_seed0/metrics.csv").exists());
}

#[test]
fn aborted_runs_exit_3_without_a_gate_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("diverge.json"), r#"{"n": 256, "transfer_n": 128, "epochs": 2, "seeds": [0], "lr": 1e8}"#).unwrap();
    let o = lab(dir.path(), &["poc", "--config", "diverge.json", "--out", "p"]);
    assert_eq!(code(&o), 3);
    assert!(!stdout(&o).contains("GATE="));
    let report = json(&dir.path().join("p/report.json"));
    assert!(report["withheld"].is_string());
    assert_eq!(json(&dir.path().join("p/manifest.json"))["status"], "aborted");
}

#[test]
fn canonical_reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--canonical", "poc", "--smoke", "--out", "p"];
    assert_eq!(code(&lab(a.path(), &args)), 0);
    assert_eq!(code(&lab(b.path(), &args)), 0);
    for f in ["report.json", "manifest.json", "config.json", "runs/uoo_seed0/metrics.csv", "runs/uoo_seed0/model.bin"] {
        assert_eq!(
            fs::read(a.path().join("p").join(f)).unwrap(),
            fs::read(b.path().join("p").join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(json(&a.path().join("p/manifest.json"))["started"].is_null());
}

#[test]
fn sweep_reports_every_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["sweep", "--smoke", "--epochs", "1", "--alphas", "0,0.01,0.1,1", "--out", "s", "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("s/sweep.json"));
    assert_eq!(r["points"].as_array().unwrap().len(), 4);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
    for f in ["ns_histogram.svg", "tau_vs_ns.svg"] {
        let svg = fs::read_to_string(dir.path().join("s").join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn stress_writes_one_report_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["stress", "--smoke", "--stress-epochs", "2", "--out", "t"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for mode in ["alpha_decay", "ood", "over_entangle"] {
        let r = json(&dir.path().join(format!("t/stress_{mode}.json")));
        assert_eq!(r["mode"], mode);
        let n = r["ns"].as_array().unwrap().len();
        assert_eq!(r["beta1"].as_array().unwrap().len(), n);
        assert_eq!(r["quality"].as_array().unwrap().len(), n);
    }
    let one = lab(dir.path(), &["stress", "--smoke", "--mode", "ood", "--out", "u"]);
    assert_eq!(code(&one), 0);
    assert!(!dir.path().join("u/stress_alpha_decay.json").exists());
}

#[test]
fn stats_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sample: Vec<String> = (0..200).map(|i| format!("{}", ((i * 37) % 101) as f64 / 10.0)).collect();
    fs::write(p.join("a.csv"), format!("tau\n{}\n", sample.join("\n"))).unwrap();
    fs::write(p.join("b.csv"), sample.join("\n")).unwrap();
    let o = lab(p, &["stats", "tost", "--delta", "0.2", "a.csv", "b.csv"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["equivalent"], true);
    assert_eq!(r["sample_size"]["formula"], 310);
    assert_eq!(r["sample_size"]["stated"], 192);

    fs::write(p.join("constant.csv"), vec!["2.5"; 40].join("\n")).unwrap();
    let o = lab(p, &["stats", "pelt", "constant.csv", "--out", "pelt"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["changepoints"], Value::Array(vec![]));
    assert_eq!(fs::read_to_string(p.join("pelt/report.json")).unwrap(), stdout(&o));

    let steps: Vec<String> = (0..60).map(|i| if i < 30 { "0" } else { "5" }.to_string()).collect();
    fs::write(p.join("step.csv"), steps.join("\n")).unwrap();
    let r: Value = serde_json::from_str(&stdout(&lab(p, &["stats", "pelt", "step.csv"]))).unwrap();
    assert_eq!(r["changepoints"], serde_json::json!([30]));

    let o = lab(p, &["stats", "etr", "--p-b", "0.3", "--p-c", "0.1", "--p-d", "0.2"]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r["etr"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    fs::write(p.join("short.csv"), "1\n2\n").unwrap();
    assert_eq!(code(&lab(p, &["stats", "tost", "short.csv", "short.csv"])), 3);
}

#[test]
fn topo_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("square.csv"), "x,y\n0,0\n1,0\n1,1\n0,1\n").unwrap();
    let o = lab(p, &["topo", "persistence", "square.csv", "--out", "sq", "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["features"], serde_json::json!([4, 1]));
    let t1 = r["total_persistence"][1].as_f64().unwrap();
    assert!((t1 - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    assert!(p.join("sq/diagram.svg").exists());

    let o = lab(p, &["topo", "bottleneck", "sq/diagram.csv", "sq/diagram.csv"]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["distance"], 0.0);

    let circle = |r: f64| -> String {
        (0..24)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 24.0;
                format!("{},{}", r * t.cos(), r * t.sin())
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    fs::write(p.join("c1.csv"), circle(1.0)).unwrap();
    fs::write(p.join("c2.csv"), circle(1.0)).unwrap();
    let r: Value = serde_json::from_str(&stdout(&lab(p, &["topo", "tsas", "c1.csv", "c2.csv"]))).unwrap();
    assert!(r["tsas"].as_f64().unwrap().abs() < 1e-12);

    fs::write(p.join("ragged.csv"), "0,0\n1\n").unwrap();
    assert_eq!(code(&lab(p, &["topo", "persistence", "ragged.csv"])), 2);
    assert_eq!(code(&lab(p, &["topo", "persistence", "square.csv", "--plot"])), 2);
}
