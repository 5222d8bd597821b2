use std::path::Path;
use std::process::{Command, Output};

fn rta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn unfiltered_run_records_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none");
    let o = rta(&["run", "--filter", "none", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("violation: phi"), "{text}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["first_violation"].is_object());
    assert!(out.join("records.csv").exists());
}

#[test]
fn filtered_run_succeeds_and_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("es");
    let o = rta(&[
        "run",
        "--filter",
        "explicit-switching",
        "--out",
        out.to_str().unwrap(),
        "--ndjson",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("violation: none"));
    let csv_rows = std::fs::read_to_string(out.join("records.csv"))
        .unwrap()
        .lines()
        .count();
    let json_rows = std::fs::read_to_string(out.join("records.ndjson"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(csv_rows, json_rows + 1);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"dt": -1.0}"#);
    assert_eq!(rta(&["run", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "typo.json", r#"{"durration": 10}"#);
    assert_eq!(rta(&["run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn unsafe_start_needs_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "fast.json",
        r#"{"initial_state": {"position": [-3000.0, 0.0, 0.0], "velocity": [10.5, 0.0, 0.0]}, "duration": 5}"#,
    );
    assert_eq!(rta(&["run", "--config", &cfg]).status.code(), Some(2));
    let o = rta(&["run", "--config", &cfg, "--allow-unsafe-start", "--filter", "none"]);
    assert_eq!(o.status.code(), Some(0));
}

// A filter that cannot recover from a start far outside the allowable set.
#[test]
fn violating_filtered_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "hopeless.json",
        r#"{"initial_state": {"position": [-3000.0, 0.0, 0.0], "velocity": [40.0, 0.0, 0.0]}, "duration": 20, "allow_unsafe_start": true}"#,
    );
    let o = rta(&["run", "--config", &cfg, "--filter", "explicit-switching"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn blowup_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "blowup.json",
        r#"{"params": {"mean_motion": 0.5}, "safety": {"nu1": 2.0},
            "primary_weights": {"q_position": 0.0, "q_velocity": 0.0, "r": 1.0},
            "nmt_grid": {"b_values": [5.0]}, "filter": "none"}"#,
    );
    let out = dir.path().join("blowup");
    let o = rta(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("records.csv").exists());
}

#[test]
fn check_params_reports_lemmas_and_warning() {
    let o = rta(&["check-params"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("= 0.2860"), "{text}");
    assert_eq!(text.matches("-> satisfied").count(), 4, "{text}");
    assert!(text.contains("warning: thrust-bound check passes only with u_max"));
}

#[test]
fn emitters_write_json_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();

    assert!(rta(&["emit-nmt-library", "--out", &d("lib.json")]).status.success());
    let lib: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("lib.json")).unwrap()).unwrap();
    assert!(!lib["members"].as_array().unwrap().is_empty());

    assert!(rta(&["emit-gains", "--out", &d("gains.json")]).status.success());
    let gains: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("gains.json")).unwrap()).unwrap();
    assert!(gains["backup"]["closed_loop_radius"].as_f64().unwrap() < 1.0);

    assert!(rta(&["emit-config", "--out", &d("default.json")]).status.success());
    assert!(rta(&[
        "run",
        "--config",
        &d("default.json"),
        "--duration",
        "50",
        "--out",
        &d("run")
    ])
    .status
    .success());
    let o = rta(&["emit-plots", "--records", &d("run/records.csv"), "--out", &d("plots")]);
    assert!(o.status.success());
    for f in [
        "speed_limit.csv",
        "vx_limit.csv",
        "vy_limit.csv",
        "vz_limit.csv",
        "boundary.json",
    ] {
        assert!(dir.path().join("plots").join(f).exists(), "{f}");
    }
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = rta(&[
        "bench",
        "--runs",
        "2",
        "--duration",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["entries"].as_array().unwrap().len(), 4);
    assert_eq!(r["runs"], 2);
}
