use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_exchange-lattice");

fn write_config(dir: &Path, model: &str, experiment: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"model": {model}, "experiment": {experiment}, "seed": 11, "output_dir": "{}"}}"#,
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

const UNIFORM_N4: &str =
    r#"{"n_sites": 4, "epsilon": 1.0, "kernel": {"type": "uniform"}, "rate": {"type": "constant", "lambda": 1.0}}"#;
const GG_N4: &str =
    r#"{"n_sites": 4, "epsilon": 1.0, "kernel": {"type": "gg"}, "rate": {"type": "sqrt_cutoff", "lambda_min": 0.5}}"#;

#[test]
fn eigen_experiment_lists_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), UNIFORM_N4, r#"{"type": "eigen"}"#);
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/eigen.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert_eq!(lines.next().unwrap(), "index,closed_form,numeric,rel_err");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, expected) in rows.iter().zip([1.0, 2.0, 3.0]) {
        assert!((row[1] - expected).abs() < 1e-12);
        assert!(row[3] <= 1e-9);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"], serde_json::json!(["eigen.csv"]));
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn minorization_of_billiard_kernel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GG_N4, r#"{"type": "minorization", "grid_size": 1000}"#);
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/minorization.json")).unwrap()).unwrap();
    // pi/4 truncated to seven decimals
    #[allow(clippy::approx_constant)]
    let threshold = 0.7853981;
    assert!(report["min_ratio"].as_f64().unwrap() >= threshold);
    assert_eq!(report["pass"], true);
}

#[test]
fn reversibility_and_stationarity_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GG_N4, r#"{"type": "reversibility", "grid_size": 200}"#);
    assert!(run(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/reversibility.json")).unwrap()).unwrap();
    assert_eq!(r["pass"], true);

    let cfg = write_config(tmp.path(), GG_N4, r#"{"type": "stationarity", "horizon": 5.0, "replicas": 2000}"#);
    assert!(run(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/stationarity.json")).unwrap()).unwrap();
    assert_eq!(r["dim_d"], 3.0);
    for key in ["test", "n", "statistic", "threshold", "pass"] {
        assert!(r["tests"][0].get(key).is_some());
    }
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let no_kernel = r#"{"n_sites": 4, "epsilon": 1.0, "rate": {"type": "constant", "lambda": 1.0}}"#;
    let cfg = write_config(tmp.path(), no_kernel, r#"{"type": "eigen"}"#);
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(!tmp.path().join("out").exists());

    let cfg = write_config(tmp.path(), UNIFORM_N4, r#"{"type": "contraction", "replicas": 10, "bogus": 1}"#);
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["run", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        UNIFORM_N4,
        r#"{"type": "contraction", "horizon": 20.0, "replicas": 500, "n_points": 11}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&["run", "--config", cfg, "--threads", "1", "--output-dir", a.to_str().unwrap()]).status.success());
    assert!(run(&["run", "--config", cfg, "--threads", "3", "--output-dir", b.to_str().unwrap()]).status.success());
    for f in ["contraction.csv", "contraction_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert!(run(&["run", "--config", cfg, "--seed", "12", "--output-dir", c.to_str().unwrap()]).status.success());
    assert_ne!(fs::read(a.join("contraction.csv")).unwrap(), fs::read(c.join("contraction.csv")).unwrap());
}

#[test]
fn list_models_is_stable() {
    let a = run(&["list-models"]);
    let b = run(&["list-models"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("gg") && text.contains("sqrt_cutoff"));
}
