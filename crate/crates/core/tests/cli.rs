//! End-to-end checks of the command-line surface: subcommands, file
//! artifacts, exit codes, and the machine-readable error line.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faultloc"))
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let out_dir = dir.join("reports");
    let config = serde_json::json!({
        "n_fault": 30,
        "n_nonfault": 8,
        "seed": 7,
        "roster": [
            {"model": "gb", "n_rounds": 10, "max_depth": 3, "min_samples_leaf": 2,
             "gamma": 0.3, "lambda_leaf": 1.0},
            {"model": "mean"}
        ],
        "noise_levels_db": [null, 30.0],
        "out_dir": out_dir,
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "faultloc {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Minimal XML well-formedness check for the emitted SVGs.
fn assert_well_formed_xml(text: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let end = rest[start..].find('>').expect("unclosed angle bracket") + start;
        let tag = &rest[start + 1..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') || tag.ends_with('/') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(name), "mismatched tags");
        } else {
            stack.push(tag.split_whitespace().next().unwrap().to_string());
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

#[test]
fn pipeline_simulate_dataset_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let config = config.to_str().unwrap();
    let waves = dir.path().join("waves");

    run_ok(&["--config", config, "simulate", "--out", waves.to_str().unwrap()]);
    assert!(waves.join("manifest.json").exists());
    assert!(waves.join("scenario_00000.csv").exists());
    let first = std::fs::read_to_string(waves.join("scenario_00000.csv")).unwrap();
    assert!(first.starts_with("t,v,i\n"), "waveform header: {}", &first[..20]);

    let dataset = dir.path().join("data.csv");
    run_ok(&[
        "--config",
        config,
        "build-dataset",
        "--in",
        waves.to_str().unwrap(),
        "--out",
        dataset.to_str().unwrap(),
        "--window",
        "10",
        "--channels",
        "vi",
    ]);
    let text = std::fs::read_to_string(&dataset).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("f0,") && header.ends_with(",label,fold"));
    assert_eq!(header.split(',').count(), 22, "10 samples x 2 channels + label + fold");
    assert_eq!(text.lines().count(), 1 + 38);
    assert!(text.contains("non-fault"));
    assert!(dir.path().join("data.scaler.json").exists());

    run_ok(&["--config", config, "evaluate"]);
    let reports = dir.path().join("reports");
    for name in ["kfold.csv", "timing.csv", "impedance.csv"] {
        assert!(reports.join(name).exists(), "{name} missing");
    }

    run_ok(&["--config", config, "curve", "--model", "gb"]);
    assert!(reports.join("curve_gb.csv").exists());

    run_ok(&["--config", config, "classify"]);
    assert!(reports.join("classify.csv").exists());

    run_ok(&["--config", config, "noise"]);
    assert!(reports.join("noise.csv").exists());

    run_ok(&["plot", "--in", reports.to_str().unwrap()]);
    for name in ["kfold.svg", "mean_mae.svg", "curve_gb.svg", "noise.svg"] {
        let path = reports.join(name);
        assert!(path.exists(), "{name} missing");
        assert_well_formed_xml(&std::fs::read_to_string(path).unwrap());
    }
}

#[test]
fn locate_emits_json_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let output = run_ok(&[
        "--config",
        config.to_str().unwrap(),
        "locate",
        "--scenario",
        "0",
        "--rf-assumed",
        "1.0",
        "--oracle-if",
    ]);
    let line = String::from_utf8(output.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert!(parsed["estimate_km"].is_number());
    assert!(parsed["true_km"].is_number());
    assert_eq!(parsed["oracle_if"], serde_json::json!(true));
}

#[test]
fn seed_override_changes_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let config = config.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run_ok(&["--config", config, "simulate", "--out", a.to_str().unwrap()]);
    run_ok(&["--config", config, "simulate", "--out", b.to_str().unwrap()]);
    run_ok(&["--config", config, "--seed", "8", "simulate", "--out", c.to_str().unwrap()]);
    let read = |d: &Path| std::fs::read_to_string(d.join("scenario_00000.csv")).unwrap();
    assert_eq!(read(&a), read(&b), "same seed, same bytes");
    assert_ne!(read(&a), read(&c), "different seed, different waveforms");
}

#[test]
fn failures_exit_nonzero_with_machine_readable_error() {
    let output = bin()
        .args(["--config", "/nonexistent/config.json", "evaluate"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let parsed: serde_json::Value =
        serde_json::from_str(stderr.lines().next().unwrap()).expect("stderr line is JSON");
    assert!(parsed["error"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let output = bin()
        .args(["--config", config.to_str().unwrap(), "curve", "--model", "nosuch"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert!(parsed["error"].as_str().unwrap().contains("nosuch"));
}
