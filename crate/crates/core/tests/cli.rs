use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use usf_core::{io, ResidueModel, SpikeTrain};

fn usf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usf")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_recover_with_itersis() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = usf(&["simulate", "--config", s(&configs().join("simulate.json")), "--out", s(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["g.csv", "y.csv", "y.json", "truth.json", "residue.json", "kernel.json"] {
        assert!(sim.join(f).exists(), "missing {f}");
    }
    let residue: ResidueModel = io::read_json(&sim.join("residue.json")).unwrap();
    let cfg = dir.path().join("itersis.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"order": 2, "fold_count": {}, "spectral_count": 6, "seed": 3}}"#, residue.count()),
    )
    .unwrap();

    let rec = dir.path().join("rec");
    let out = usf(&[
        "recover",
        "--method",
        "itersis",
        "--input",
        s(&sim.join("y.csv")),
        "--kernel",
        s(&sim.join("kernel.json")),
        "--config",
        s(&cfg),
        "--out",
        s(&rec),
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth: SpikeTrain = io::read_json(&sim.join("truth.json")).unwrap();
    let est: SpikeTrain = io::read_json(&rec.join("spikes.json")).unwrap();
    assert_eq!(est.count(), 2);
    for (a, b) in truth.delays.iter().zip(&est.delays) {
        assert!((a - b).abs() < 1.0, "{truth:?} vs {est:?}");
    }
    let diag = std::fs::read_to_string(rec.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("iter,mse,stop_norm"));
}

#[test]
fn wrong_config_kind_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(usf(&["simulate", "--config", s(&configs().join("simulate.json")), "--out", s(&sim)]).status.success());
    let out = usf(&[
        "recover",
        "--method",
        "theorem1",
        "--input",
        s(&sim.join("y.csv")),
        "--kernel",
        s(&sim.join("kernel.json")),
        "--config",
        s(&configs().join("bench_kernel.json")),
        "--out",
        s(&dir.path().join("rec")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_config_error() {
    let out = usf(&["bench-clipping", "--config", "/nonexistent/clipping.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_info_prints_json() {
    let out = usf(&["kernel-info", "--kernel", s(&configs().join("bench_kernel.json")), "--bins", "4"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["order"], 3);
    assert_eq!(v["derivative_sup_bounds"].as_array().unwrap().len(), 3);
    assert!(v["favard_constant"].as_f64().unwrap() > 1.0);
}

#[test]
fn bench_clipping_writes_reproducible_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = usf(&["bench-clipping", "--config", s(&configs().join("clipping.json")), "--out", s(&out_dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("clipping.csv").exists());
        assert!(out_dir.join("clipping_run_info.json").exists());
        std::fs::read(out_dir.join("clipping.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bench_curve_honours_trial_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = usf(&[
        "bench-curve",
        "--config",
        s(&configs().join("curve.json")),
        "--out",
        s(dir.path()),
        "--trials",
        "2",
        "--threads",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("curve.json")).unwrap()).unwrap();
    let cells = rep["body"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 15);
    assert!(cells.iter().all(|c| c["trial_count"] == 2));
    let csv = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
}
