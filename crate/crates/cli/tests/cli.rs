use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn metasim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metasim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn short_base(dir: &Path) -> String {
    write(
        dir,
        "short.json",
        r#"{"name": "short", "settings": {"t_end": 30, "transient": 5}}"#,
    )
}

#[test]
fn run_writes_every_artifact_with_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_base(dir.path());
    let out = metasim(&["run", &sc, "--out", "o"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o = dir.path().join("o");

    let ts = fs::read_to_string(o.join("timeseries.csv")).unwrap();
    let mut lines = ts.lines();
    assert_eq!(lines.next(), Some("t,M,N,I,Vp,born_cum,exited_cum"));
    assert_eq!(lines.next(), Some("0,0,0,0,0.1,0,0"));
    assert_eq!(ts.lines().count(), 302);

    let hist = fs::read_to_string(o.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("bin_lo,bin_hi,mass"));
    assert_eq!(hist.lines().count(), 41);

    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(o.join("metrics.json")).unwrap()).unwrap();
    let keys: Vec<&str> = metrics
        .as_object()
        .unwrap()
        .keys()
        .map(|k| k.as_str())
        .collect();
    for k in [
        "peaks",
        "mean_period",
        "amplitude",
        "min_after_transient",
        "largest_volume",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert!(!keys.contains(&"lambda0"));
    let peak = &metrics["peaks"][0];
    assert!(peak["t"].is_number() && peak["M"].is_number());

    for f in ["M", "N", "I", "Vp"] {
        assert!(o.join("plots").join(format!("{f}.svg")).exists(), "{f}.svg");
    }
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(o.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["scenario"]["settings"]["dt"], 0.01);
}

#[test]
fn linear_run_reports_lambda0() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "lin.json",
        r#"{"name": "lin", "params": {"e": 0}, "settings": {"t_end": 10}, "outputs": {"plots": false}}"#,
    );
    let out = metasim(&["run", &sc, "--out", "o"], dir.path());
    assert!(out.status.success());
    let metrics: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/metrics.json")).unwrap())
            .unwrap();
    let l = metrics["lambda0"].as_f64().unwrap();
    assert!((l - 0.42928146).abs() < 1e-6, "{l}");
    assert!(!dir.path().join("o/plots").exists());
}

#[test]
fn lambda0_prints_spectral_result() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "lin.json",
        r#"{"name": "lin", "params": {"e": 0, "alpha": 0, "m": 2}}"#,
    );
    let out = metasim(&["lambda0", &sc], dir.path());
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r["lambda0"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    for k in ["tau_max", "quadrature_nodes", "residual"] {
        assert!(r.get(k).is_some(), "{k}");
    }

    let base = write(dir.path(), "base.json", r#"{"name": "base"}"#);
    let out = metasim(&["lambda0", &base], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"name": "x", "settings": {"dt": "small"}}"#,
    );
    let out = metasim(&["run", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("settings.dt"));

    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"name": "x", "params": {"gamma": 1}}"#,
    );
    assert_eq!(
        metasim(&["run", &unknown], dir.path()).status.code(),
        Some(2)
    );

    let invalid = write(
        dir.path(),
        "i.json",
        r#"{"name": "x", "params": {"K0": -1}}"#,
    );
    assert_eq!(
        metasim(&["run", &invalid], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = metasim(&["run", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn blowup_exits_3_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "b.json",
        r#"{"name": "b", "params": {"m": 1e6}, "settings": {"dt": 0.5, "sample_every": 0.5, "t_end": 5}}"#,
    );
    let out = metasim(&["run", &sc, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let diag: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/error.json")).unwrap())
            .unwrap();
    assert_eq!(diag["error"], "blowup");
    assert!(diag["time"].as_f64().unwrap() > 0.0);
}

#[test]
fn catalog_emits_loadable_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = metasim(&["catalog", "--emit", "cat"], dir.path());
    assert!(out.status.success());
    let files: Vec<_> = fs::read_dir(dir.path().join("cat")).unwrap().collect();
    assert_eq!(files.len(), 12);
    let sc: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cat/bursts-long.json")).unwrap())
            .unwrap();
    assert_eq!(sc["settings"]["t_end"], 1000.0);
    assert_eq!(sc["settings"]["dt"], 0.01);
    assert_eq!(sc["outputs"]["log_scale"], true);

    let listing = metasim(&["catalog"], dir.path());
    assert!(String::from_utf8_lossy(&listing.stdout).contains("complex-periodic"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "sw.json",
        r#"{"base": {"name": "s", "settings": {"t_end": 20, "transient": 5}, "outputs": {"plots": false}},
            "axis": "e", "values": {"log_range": {"start": 0.5, "stop": 2, "count": 3}}, "parallelism": 2}"#,
    );
    let out = metasim(&["sweep", &spec, "--out", "sw", "--jobs", "1"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("sw/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("axis_value,lambda0,mean_period,amplitude,min_after_transient,max_M,largest_volume,error")
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(
        rows.iter().all(|r| r.ends_with(',')),
        "no errors expected: {rows:?}"
    );
    assert!(dir.path().join("sw/000_e=0.5/timeseries.csv").exists());
}

#[test]
fn degenerate_sweep_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_base(dir.path());
    assert!(metasim(&["run", &sc, "--out", "single"], dir.path())
        .status
        .success());
    let spec = write(
        dir.path(),
        "sw.json",
        r#"{"base": {"name": "short", "settings": {"t_end": 30, "transient": 5}}, "axis": "b", "values": [1]}"#,
    );
    assert!(metasim(&["sweep", &spec, "--out", "sw"], dir.path())
        .status
        .success());
    let a = fs::read(dir.path().join("single/timeseries.csv")).unwrap();
    let b = fs::read(dir.path().join("sw/000_b=1/timeseries.csv")).unwrap();
    assert_eq!(a, b);
    let ma = fs::read(dir.path().join("single/metrics.json")).unwrap();
    let mb = fs::read(dir.path().join("sw/000_b=1/metrics.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn sweep_with_failures_keeps_rows_and_all_failed_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let mixed = write(
        dir.path(),
        "mixed.json",
        r#"{"base": {"name": "s", "settings": {"dt": 0.5, "sample_every": 0.5, "t_end": 5, "transient": 0}, "outputs": {"plots": false}},
            "axis": "m", "values": [0.01, 1e6]}"#,
    );
    let out = metasim(&["sweep", &mixed, "--out", "mx"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("mx/summary.csv")).unwrap();
    let rows: Vec<_> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1000000,"));
    assert!(rows[1].contains("blow-up"));

    let all_bad = write(
        dir.path(),
        "bad.json",
        r#"{"base": {"name": "s", "settings": {"dt": 0.5, "sample_every": 0.5, "t_end": 5}}, "axis": "m", "values": [1e6]}"#,
    );
    let out = metasim(&["sweep", &all_bad, "--out", "ab"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("ab/summary.csv").exists());
}

#[test]
fn sweep_rejects_invalid_values_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "sw.json",
        r#"{"base": {"name": "s"}, "axis": "alpha", "values": [0.5, 1.5]}"#,
    );
    let out = metasim(&["sweep", &spec, "--out", "sw"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("sw").exists());
}
