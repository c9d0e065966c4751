use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tdthr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdthr"))
        .args(args)
        .env_remove("TDTHR_OUT_DIR")
        .env_remove("TDTHR_JOBS")
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A short desk run so the binary tests stay fast.
fn quick_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("quick.toml");
    let text = format!(
        "duration = 25.0\n[field]\nwidth = 600.0\nheight = 600.0\nnode_count = 100\ndensity = 0.000278\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_echoes_the_resolved_table3_config() {
    let o = tdthr(&["validate", "--config", configs().join("table3.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let echoed = tdthr::sim::SimConfig::from_toml_str(&text).unwrap();
    assert_eq!(echoed.resolved(), tdthr::sim::SimConfig::default().resolved());
    assert!(text.contains("prr_beta = 0.6"));
}

#[test]
fn out_of_range_critical_rate_names_field_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "[traffic]\ncritical_rate = 1.5\n");
    let o = tdthr(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("traffic.critical_rate") && err.contains("[0, 1]"), "{err}");
    let out = dir.path().join("row.csv");
    let o = tdthr(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn sink_outside_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(
        dir.path(),
        "[[sinks]]\nx = 0.0\ny = 0.0\n[[sinks]]\nx = 900.0\ny = 600.0\n",
    );
    let o = tdthr(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("sinks[1] at (900, 600) lies outside the field"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn empty_prr_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "[estimators]\nprr_window = 0\n");
    let o = tdthr(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("estimators.prr_window"), "{}", stderr(&o));
}

#[test]
fn every_violation_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "[estimators]\nprr_window = 0\nprr_beta = 2.0\n");
    let o = tdthr(&["validate", "--config", cfg.to_str().unwrap()]);
    let err = stderr(&o);
    assert!(err.contains("prr_window") && err.contains("prr_beta"), "{err}");
}

#[test]
fn run_twice_gives_byte_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "");
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("row{i}.csv"));
        let trace = dir.path().join(format!("trace{i}.txt"));
        let o = tdthr(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        rows.push(fs::read(&out).unwrap());
        traces.push(fs::read(&trace).unwrap());
    }
    assert_eq!(rows[0], rows[1]);
    assert_eq!(traces[0], traces[1]);
    let text = String::from_utf8(rows.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], tdthr::metrics::MetricsLedger::csv_header());
    assert!(lines[1].contains(",9,tdthr,"), "{}", lines[1]);
}

#[test]
fn relative_run_output_lands_in_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "");
    let o = Command::new(env!("CARGO_BIN_EXE_tdthr"))
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "2",
            "--out",
            "nested/row.csv",
        ])
        .env("TDTHR_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("nested/row.csv").exists());
}

#[test]
fn unreachable_topology_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "[radio]\nrange = 5.0\n");
    let out = dir.path().join("row.csv");
    let o = tdthr(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

fn write_spec(dir: &Path, values: &str, extra: &str) -> PathBuf {
    quick_config(dir, "");
    let spec = dir.join("sweep.toml");
    fs::write(
        &spec,
        format!(
            "base_config = \"quick.toml\"\nparameter = \"traffic.critical_rate\"\nvalues = {values}\nseeds = 2\nprotocols = [\"tdthr\", \"greedy_geo\"]\n{extra}"
        ),
    )
    .unwrap();
    spec
}

#[test]
fn sweep_writes_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "[0.2, 0.6, 1.0]", "");
    let out = dir.path().join("results");
    let o = tdthr(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 2);
    assert!(runs.lines().skip(1).all(|l| l.contains(",ok,")));
    let plot = fs::read_to_string(out.join("plot_prr_critical.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 3);
    assert!(plot.lines().next().unwrap().contains("tdthr_mean"));

    // Thread count does not change the aggregate.
    let again = dir.path().join("again");
    let o = Command::new(env!("CARGO_BIN_EXE_tdthr"))
        .args([
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ])
        .env("TDTHR_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(runs, fs::read_to_string(again.join("runs.csv")).unwrap());
}

#[test]
fn sweep_records_failed_runs_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "[0.5, 1.5]", "");
    let out = dir.path().join("results");
    let o = tdthr(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 2);
    let failed: Vec<&str> = runs.lines().filter(|l| l.contains(",failed,")).collect();
    assert_eq!(failed.len(), 4);
    assert!(failed.iter().all(|l| l.contains("critical_rate")));
}

#[test]
fn sweep_spec_errors_are_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "[]", "");
    let o = tdthr(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));

    let spec = dir.path().join("bad.toml");
    fs::write(
        &spec,
        "parameter = \"traffic.nonexistent\"\nvalues = [1.0]\nseeds = 1\n",
    )
    .unwrap();
    let o = tdthr(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonexistent"), "{}", stderr(&o));
}

#[test]
fn sweep_without_any_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "[0.5]", "");
    let o = tdthr(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_arguments_exit_one() {
    assert_eq!(tdthr(&["run", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(tdthr(&[]).status.code(), Some(1));
    assert_eq!(tdthr(&["--version"]).status.code(), Some(0));
}
