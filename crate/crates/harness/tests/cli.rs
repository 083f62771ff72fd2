//! End-to-end checks of the `emt` binary and the report files it writes.

use std::fs;
use std::path::Path;
use std::process::Command;

use emt_harness::report::{recompute_tasks, AggregateReport, SummaryRow};

fn emt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emt"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SPHERES: &str = r#"{
  "version": 1,
  "problem": { "kind": "preset", "name": "sphere-related-10d" },
  "engine": { "kind": "adaptive" },
  "evolver": { "pop_size": 20, "generations": 40, "target": -5.0 },
  "n_runs": 3,
  "base_seed": 7
}"#;

fn run_ok(config: &Path, out: &Path) -> String {
    let output = emt().arg("run").arg(config).arg("--out").arg(out).arg("--jobs").arg("2").output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout).unwrap()
}

fn summary(dir: &Path) -> Vec<SummaryRow> {
    csv::Reader::from_path(dir.join("summary.csv")).unwrap().deserialize().map(Result::unwrap).collect()
}

#[test]
fn run_writes_a_consistent_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "spheres.json", SPHERES);
    let out = tmp.path().join("report");
    let stdout = run_ok(&config, &out);
    assert!(stdout.contains("report written to"));

    let report = AggregateReport::load(&out).unwrap();
    assert_eq!(report.seeds, vec![7, 8, 9]);
    assert_eq!(report.engine, "adaptive");
    assert_eq!(report.run_dirs.len(), 3);
    for d in &report.run_dirs {
        for f in ["trace.csv", "result.json", "transfer.csv"] {
            assert!(out.join(d).join(f).is_file(), "{d}/{f}");
        }
    }
    assert_eq!(recompute_tasks(&out).unwrap(), report.tasks);

    let rows = summary(&out);
    assert!(rows.iter().all(|r| r.engine == "adaptive" && r.n_runs == 3));
    assert!(rows.iter().any(|r| r.metric == "median_evaluations_to_target"));
    assert!(!rows.iter().any(|r| r.metric.starts_with("success")));
}

#[test]
fn reruns_reproduce_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "spheres.json", SPHERES);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&config, &a);
    run_ok(&config, &b);
    let strip = |dir: &Path| AggregateReport { created_unix: 0, ..AggregateReport::load(dir).unwrap() };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());
    assert_eq!(fs::read(a.join("run-001/trace.csv")).unwrap(), fs::read(b.join("run-001/trace.csv")).unwrap());
}

#[test]
fn pole_balancing_reports_success_rates_and_episodes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "poles.json",
        r#"{
          "version": 1,
          "problem": { "kind": "polecart", "short_pole_lengths": [0.6, 0.65] },
          "engine": { "kind": "mfea", "rmp": 0.3 },
          "evolver": { "pop_size": 20, "generations": 2 },
          "n_runs": 2,
          "dump_episodes": true
        }"#,
    );
    let out = tmp.path().join("poles");
    let stdout = run_ok(&config, &out);
    assert!(stdout.contains("success"));
    let report = AggregateReport::load(&out).unwrap();
    for t in &report.tasks {
        let rate = t.success_rate.unwrap();
        assert!([0.0, 50.0, 100.0].contains(&rate));
        assert_eq!(t.success_threshold, Some(5000.0));
    }
    let episode = fs::read_to_string(out.join("run-000/episode-task1.csv")).unwrap();
    assert!(episode.starts_with("step,x,x_dot,theta1,theta1_dot,theta2,theta2_dot,force"));
    assert!(summary(&out).iter().any(|r| r.metric == "success_rate" && r.stderr.is_some()));
}

#[test]
fn compare_lines_up_engines_and_rejects_other_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let adaptive = write(tmp.path(), "adaptive.json", SPHERES);
    let cea = write(tmp.path(), "cea.json", &SPHERES.replace("\"adaptive\"", "\"cea\""));
    let other = write(tmp.path(), "other.json", &SPHERES.replace("sphere-related-10d", "sphere-unrelated-10d"));
    for (config, dir) in [(&adaptive, "adaptive"), (&cea, "cea"), (&other, "other")] {
        run_ok(config, &tmp.path().join(dir));
    }

    let table = tmp.path().join("table.csv");
    let output = emt()
        .arg("compare")
        .arg(tmp.path().join("adaptive"))
        .arg(tmp.path().join("cea"))
        .arg("--csv")
        .arg(&table)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("adaptive@adaptive") && stdout.contains("cea@cea"));
    assert!(!stdout.contains("success_rate"));
    let csv_text = fs::read_to_string(&table).unwrap();
    assert!(csv_text.starts_with("task_id,metric,adaptive@adaptive,cea@cea"));

    let output = emt().arg("compare").arg(tmp.path().join("adaptive")).arg(tmp.path().join("other")).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("different problem"));
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "unknown.json", &SPHERES.replace("\"n_runs\"", "\"n_rnus\""));
    let output = emt().arg("run").arg(&unknown).arg("--out").arg(tmp.path().join("x")).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("n_rnus") && stderr.contains("line"), "{stderr}");

    let zero = write(tmp.path(), "zero.json", &SPHERES.replace("\"n_runs\": 3", "\"n_runs\": 0"));
    let output = emt().arg("run").arg(&zero).arg("--out").arg(tmp.path().join("y")).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("n_runs"));

    let output = emt().arg("run").arg(tmp.path().join("missing.json")).output().unwrap();
    assert_ne!(output.status.code(), Some(0));
}

#[test]
fn output_root_variable_picks_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "spheres.json", &SPHERES.replace("\"n_runs\": 3", "\"n_runs\": 1"));
    let root = tmp.path().join("root");
    let output = emt().arg("run").arg(&config).env("EMT_OUTPUT_ROOT", &root).output().unwrap();
    assert!(output.status.success());
    assert!(root.join("spheres/aggregate.json").is_file());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        emt_harness::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn presets_are_listed() {
    let output = emt().args(["presets", "list"]).output().unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    for name in ["polecart-t123", "bilevel-quadratic", "fidelity-sphere-10d"] {
        assert!(stdout.contains(name));
    }
}
