use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schauder-lab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn zero_field_has_zero_ratio() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("zero.json"),
        r#"{"command": "caccioppoli", "grid": {"n": 2, "m": 33}, "problem": {"kind": "zero"},
            "params": {"resolutions": [33]}}"#,
    )
    .unwrap();
    let out = lab(&["caccioppoli", "--config", "zero.json", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let table = fs::read_to_string(dir.path().join("run/reports.csv")).unwrap();
    let rows: Vec<_> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(6), Some("0e0"));
    let verdict = fs::read_to_string(dir.path().join("run/verdict.txt")).unwrap();
    assert!(verdict.starts_with("PASS\tcaccioppoli[0]"), "{verdict}");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("small.json"),
        r#"{"command": "degiorgi", "grid": {"n": 2, "m": 129},
            "problem": {"kind": "ensemble", "size": 6}, "params": {"training_size": 4}}"#,
    )
    .unwrap();
    for run in ["a", "b"] {
        let out = lab(&["degiorgi", "--config", "small.json", "--seed", "3", "--out", run], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    for table in ["traces.csv", "no_spike.csv", "linf_bound.csv", "amplified_traces.csv"] {
        let a = fs::read(dir.path().join("a").join(table)).unwrap();
        let b = fs::read(dir.path().join("b").join(table)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{table}");
    }
}

#[test]
fn counterexample_passes_gate_and_fails_growth() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["liouville", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    let gates: Vec<_> = text.lines().filter(|l| l.contains("harmonic_gate")).collect();
    assert!(!gates.is_empty() && gates.iter().all(|l| l.starts_with("PASS\t")), "{text}");
    let growth: Vec<_> = text.lines().filter(|l| l.contains("polynomial_growth")).collect();
    assert_eq!(growth.len(), 10);
    assert!(growth.iter().all(|l| l.starts_with("FAIL-as-expected\t")), "{text}");
    assert!(dir.path().join("run/growth.csv").exists());
}

#[test]
fn plots_need_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["plots", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(lab(&["plots", "empty"], dir.path()).status.code(), Some(2));

    assert_eq!(lab(&["liouville", "--out", "run"], dir.path()).status.code(), Some(0));
    let out = lab(&["plots", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("run/liouville_scan_k1.gp").exists(), "{}", stdout(&out));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("even.json"), r#"{"command": "solve", "grid": {"n": 2, "m": 64}}"#).unwrap();
    fs::write(dir.path().join("typo.json"), r#"{"command": "solve", "params": {"radius": 1}}"#).unwrap();
    fs::write(dir.path().join("solve.json"), r#"{"command": "solve"}"#).unwrap();
    for (cmd, file) in [("solve", "even.json"), ("solve", "typo.json"), ("liouville", "solve.json"), ("solve", "missing.json")] {
        let out = lab(&[cmd, "--config", file, "--out", "run"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{cmd} {file}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(file), "{err}");
    }
}
