use std::path::{Path, PathBuf};
use std::process::Command;

use aggrokin::config::{parse_str, Experiment};
use aggrokin::execute;
use serde_json::{json, Value};
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn box_kernel() -> Value {
    json!({"kind": "indicator-box", "half_width": 0.5, "amplitude": 1.0})
}

#[test]
fn minimal_equilibria_config_parses() {
    let cfg = parse_str(r#"{"experiment": "equilibria", "params": {"m": 1, "lambda": 0.2}, "beta": 1}"#).unwrap();
    assert_eq!(cfg.experiment, Some(Experiment::Equilibria));
    assert_eq!((cfg.params.m, cfg.params.lambda, cfg.params.epsilon), (1.0, 0.2, 1.0));
    assert_eq!(cfg.beta, Some(1.0));
}

#[test]
fn misspelled_key_is_named() {
    let err = parse_str(r#"{"params": {"m": 1, "lamda": 0.2}, "beta": 1}"#).unwrap_err().to_string();
    assert!(err.contains("lamda"), "{err}");
    assert!(err.contains("params"), "{err}");
    let err = parse_str(r#"{"params": {"m": 1, "lambda": 0.2}, "bta": 1}"#).unwrap_err().to_string();
    assert!(err.contains("bta"), "{err}");
    let err = parse_str(r#"{"params": {"m": "one", "lambda": 0.2}}"#).unwrap_err().to_string();
    assert!(err.contains("params.m") && err.contains("f64"), "{err}");
}

#[test]
fn equilibria_run_writes_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "eq.json", &json!({"params": {"m": 1, "lambda": 0.2}, "beta": 1}));
    let out = tmp.path().join("out");
    let rec = execute(Experiment::Equilibria, &cfg, &out, None).unwrap();
    assert!(rec.passed);
    let report = read_report(&out);
    let k1 = report["summary"]["equilibria"]["kappa1"].as_f64().unwrap();
    let k2 = report["summary"]["equilibria"]["kappa2"].as_f64().unwrap();
    assert!((k1 - 0.2592).abs() < 5e-5 && (k2 - 2.5426).abs() < 5e-5);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["inputs"]["files"][0]["path"], "eq.json");
    assert_eq!(report["tolerances"]["residual"], 1e-10);
}

#[test]
fn settings_typo_is_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        &json!({
            "params": {"m": 1, "lambda": 0.2},
            "potential": box_kernel(),
            "grid": {"dim": 1, "length": 8.0, "n": 64},
            "initial": {"kind": "constant", "value": 0.5},
            "settings": {"t_end": 1.0, "report_evry": 0.5}
        }),
    );
    let err = format!("{:#}", execute(Experiment::MesoRun, &cfg, &tmp.path().join("out"), None).unwrap_err());
    assert!(err.contains("settings.report_evry"), "{err}");
}

#[test]
fn experiment_mismatch_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eq.json",
        &json!({"experiment": "horizon", "params": {"m": 1, "lambda": 0.2}, "beta": 1}),
    );
    let err = format!("{:#}", execute(Experiment::Equilibria, &cfg, &tmp.path().join("out"), None).unwrap_err());
    assert!(err.contains("horizon"), "{err}");
}

#[test]
fn aggregation_refuses_initial_data_below_b() {
    // b = 1.1·b̂ ≈ 18.5 for m = λ = 1; the bump peaks at 20 but falls below b near the region edges.
    let b = 1.1 * 16.840269491443436;
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "agg.json",
        &json!({
            "params": {"m": 1, "lambda": 1},
            "potential": box_kernel(),
            "grid": {"dim": 1, "length": 64.0, "n": 1024, "origin": -32.0},
            "initial": {"kind": "bump", "center": 0.0, "width": 6.0, "height": 19.0, "base": 1.0},
            "settings": {"region": {"lo": [-4.0], "hi": [4.0]}, "b": b, "kappa": 2.0, "t_end": 1.0, "report_every": 0.1}
        }),
    );
    let out = tmp.path().join("out");
    let err = format!("{:#}", execute(Experiment::AggregationRun, &cfg, &out, None).unwrap_err());
    assert!(err.contains("b < u0 < κ·b"), "{err}");
    assert!(!out.join("report.json").exists());
}

fn micro_config(dir: &Path, seed: u64) -> PathBuf {
    write_config(
        dir,
        "micro.json",
        &json!({
            "params": {"m": 1, "lambda": 0.2, "epsilon": 0.5},
            "potential": box_kernel(),
            "grid": {"dim": 1, "length": 10.0, "n": 64},
            "initial": {"kind": "bump", "center": 5.0, "width": 2.0, "height": 1.0, "base": 0.2},
            "seed": seed,
            "settings": {"t_end": 1.0, "replicas": 8, "snapshot_times": [0.5, 1.0], "density_bins": 5}
        }),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = micro_config(tmp.path(), 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    execute(Experiment::MicroRun, &cfg, &a, None).unwrap();
    execute(Experiment::MicroRun, &cfg, &b, None).unwrap();
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    assert_eq!(
        fa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        ["density.csv", "report.json", "snapshots.csv", "snapshots.json"]
    );
    assert!(fa == fb, "outputs differ between identical runs");

    let c = tmp.path().join("c");
    execute(Experiment::MicroRun, &cfg, &c, Some(4)).unwrap();
    let fc = dir_bytes(&c);
    assert_ne!(fa[2].1, fc[2].1, "a different seed gave the same snapshots");
    assert_eq!(read_report(&c)["seed"], 4);
}

#[test]
fn initial_condition_from_file() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("value\n");
    for i in 0..64 {
        text.push_str(&format!("{}\n", 0.5 + 0.01 * i as f64));
    }
    std::fs::write(tmp.path().join("u0.csv"), text).unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        &json!({
            "params": {"m": 1, "lambda": 0.2},
            "potential": box_kernel(),
            "grid": {"dim": 1, "length": 8.0, "n": 64},
            "initial": {"kind": "file", "path": "u0.csv"},
            "settings": {"t_end": 0.5, "report_every": 0.25}
        }),
    );
    let out = tmp.path().join("out");
    assert!(execute(Experiment::MesoRun, &cfg, &out, None).unwrap().passed);
    let report = read_report(&out);
    let files = report["inputs"]["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    assert!(files.iter().any(|f| f["path"] == "u0.csv"));
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_aggrokin");
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.json", &json!({"params": {"m": 1, "lambda": 0.2}, "beta": 1}));
    let bad = write_config(tmp.path(), "bad.json", &json!({"params": {"m": 1, "lamda": 0.2}, "beta": 1}));
    // At K = 100 the recurrence is far from its asymptote, so the checks fail.
    let failing =
        write_config(tmp.path(), "fail.json", &json!({"params": {"m": 1, "lambda": 16}, "settings": {"k_max": 100}}));
    let run = |exp: &str, cfg: &Path| {
        Command::new(bin)
            .args([exp, "--config", cfg.to_str().unwrap(), "--out", tmp.path().join(exp).to_str().unwrap()])
            .output()
            .unwrap()
    };
    assert_eq!(run("equilibria", &good).status.code(), Some(0));
    let out = run("equilibria", &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));
    let out = run("recurrence", &failing);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
