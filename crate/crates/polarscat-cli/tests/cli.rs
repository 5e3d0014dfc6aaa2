//! End-to-end behavior of the `polarscat` binary: exit codes, output
//! discipline, determinism, and flag handling.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarscat"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// A small fixed-thickness cavity config that avoids the tuning search.
const FAST_CONFIG: &str = "version = 1\nseed = 11\n\n[cavity]\nfilm_thickness_nm = 148.36\n";

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_config_exits_4_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        dir.path().join("absent.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    assert!(!out_dir.exists(), "failed run must not create outputs");
}

#[test]
fn unsupported_config_version_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, "version = 99\n");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, "version = 1\nnot_a_key = true\n");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn malformed_set_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--set",
        "grid.step_ev",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn two_row_series_is_an_insufficient_data_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let series = dir.path().join("two.csv");
    write(
        &series,
        "detuning_ev,e_upper_ev,e_lower_ev\n-0.1,2.2,2.0\n0.1,2.25,2.05\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "fit-dispersion",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--input",
        series.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(!out_dir.exists(), "failed run must not create outputs");
}

#[test]
fn strengthless_series_fails_hopfield_schema_check() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let series = dir.path().join("bare.csv");
    write(
        &series,
        "detuning_ev,e_upper_ev,e_lower_ev\n-0.1,2.2,2.0\n0.0,2.18,2.04\n0.1,2.25,2.05\n",
    );
    let out = run(&[
        "hopfield",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--input",
        series.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn simulate_writes_three_spectra_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(out.stdout.is_empty(), "--quiet must silence stdout");
    for name in ["reflectance.csv", "transmittance.csv", "absorption.csv"] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest_simulate.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seed"], 11);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 3);
    for entry in outputs {
        let path = out_dir.join(entry["path"].as_str().unwrap());
        assert!(path.is_file(), "manifest lists missing file {path:?}");
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let base = dir.path().join("base");
    let reseeded = dir.path().join("reseeded");
    let repeat = dir.path().join("repeat");
    for (out_dir, seed) in [(&base, None), (&reseeded, Some("99")), (&repeat, Some("99"))] {
        let mut args = vec![
            "synth-scatter",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--quiet",
        ];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    }
    let spectrum = "scatter/single_scattering.csv";
    let read = |d: &Path| std::fs::read(d.join(spectrum)).unwrap();
    assert_ne!(read(&base), read(&reseeded), "a new seed must change the noise");
    assert_eq!(read(&reseeded), read(&repeat), "equal seeds must agree");
}

#[test]
fn set_flag_reaches_nested_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet",
        "--set",
        "grid.min_ev=2.0",
        "--set",
        "grid.max_ev=2.2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = std::fs::read_to_string(out_dir.join("reflectance.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    let last = text.lines().last().unwrap();
    assert!(first.starts_with("2.0"), "grid should start at 2.0, row `{first}`");
    assert!(last.starts_with("2.2"), "grid should end at 2.2, row `{last}`");
}

#[test]
fn sweep_flags_unresolved_points_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    // 300 nm puts the bare-cavity dip far outside the energy grid.
    write(
        &config,
        "version = 1\n\n[sweep]\nthicknesses_nm = [144.7, 148.4, 152.1, 300.0]\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let summary = std::fs::read_to_string(out_dir.join("sweep_summary.csv")).unwrap();
    let flags: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(flags, ["1", "1", "1", "0"], "summary:\n{summary}");
    // The unresolved point is excluded from the dispersion series.
    let series = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 4, "header plus three resolved rows");
}

#[test]
fn single_spectrum_fit_reports_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, FAST_CONFIG);
    let synth_dir = dir.path().join("synth");
    let out = run(&[
        "synth-scatter",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        synth_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let fit_dir = dir.path().join("fit");
    let spectrum = synth_dir.join("scatter/single_scattering.csv");
    let out = run(&[
        "fit-spectrum",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        fit_dir.to_str().unwrap(),
        "--input",
        spectrum.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("sigma_u"), "report missing strengths: {stdout}");
    assert!(fit_dir.join("spectrum_fit.txt").is_file());
}

#[test]
fn pipeline_stages_chain_through_one_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(
        &config,
        "version = 1\nseed = 5\n\n[cavity]\nfilm_thickness_nm = 148.36\n\n[oscillator]\nv_ev = 0.075\n\n[sweep]\nthicknesses_nm = [141.3, 144.7, 148.4, 152.1, 156.0]\n",
    );
    let out_dir = dir.path().join("out");
    for sub in ["simulate", "synth-scatter", "fit-spectrum", "fit-dispersion", "hopfield"] {
        let out = run(&[
            sub,
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", stderr_of(&out));
    }
    let coupling: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("coupling.json")).unwrap())
            .unwrap();
    let v = coupling["v_ev"].as_f64().unwrap();
    assert!((v - 0.075).abs() < 0.01, "recovered coupling {v}");
    assert!(out_dir.join("hopfield_plot.csv").is_file());
    assert!(out_dir.join("hopfield_report.txt").is_file());
}
