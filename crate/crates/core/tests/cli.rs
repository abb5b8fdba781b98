use std::path::Path;
use std::process::{Command, Output};

fn specfilter(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_specfilter"));
    cmd.args(args).env_remove("SPECFILTER_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn suite_writes_traces_summary_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = specfilter(&["suite", "--out", path(dir.path()), "--sample-rate", "1000"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "clean_cold.csv",
        "clean_spec30.csv",
        "noisy_spec30-hyst.csv",
        "summary.txt",
        "summary.json",
        "outputs.tsv",
        "errors.tsv",
        "hysteresis.tsv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("spec100"));
    let outputs = std::fs::read_to_string(dir.path().join("outputs.tsv")).unwrap();
    let header = outputs.lines().nth(1).unwrap();
    assert!(header.starts_with("n\tt\tu\ty_benchmark\ty_cold"));
    assert!(header.ends_with("switch"));
    assert_eq!(outputs.lines().filter(|l| l.ends_with("\t1")).count(), 1);
}

#[test]
fn run_with_flags_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"noise": {"mean": 0.1, "stddev": 0.5, "seed": 1}, "strategy": {"kind": "cold"}}"#)
        .unwrap();
    let out = specfilter(
        &[
            "run",
            "--config",
            path(&cfg),
            "--strategy",
            "spec",
            "--horizon-n",
            "20",
            "--hysteresis",
            "auto",
            "--noise-seed",
            "5",
            "--executor",
            "concurrent",
            "--out",
            path(dir.path()),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("spec20.csv")).unwrap();
    assert!(trace.starts_with("# specfilter trace label=noisy/spec20 prng=chacha8 seed=5\n"));
    assert!(dir.path().join("hysteresis.tsv").is_file());
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"noise": {"mean": 0.1, "stddev": 0.5, "seed": 1}}"#).unwrap();
    let out = specfilter(
        &["run", "--config", path(&cfg), "--strategy", "cold", "--out", path(dir.path())],
        &[("SPECFILTER_SEED", "99")],
    );
    assert!(out.status.success());
    let trace = std::fs::read_to_string(dir.path().join("cold.csv")).unwrap();
    assert!(trace.lines().next().unwrap().ends_with("seed=99"));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(specfilter(&["run", "--strategy", "spec", "--horizon-n", "30", "--out", path(d.path())], &[])
            .status
            .success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("spec30.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"threshold": 2.0}"#).unwrap();
    for (args, env) in [
        (vec!["run", "--config", path(&bad)], vec![]),
        (vec!["suite", "--config", "/nonexistent/cfg.json", "--out", path(dir.path())], vec![]),
        (vec!["run", "--strategy", "cold", "--out", path(dir.path())], vec![("SPECFILTER_SEED", "x")]),
        (vec!["run", "--hysteresis", "lots"], vec![]),
    ] {
        let out = specfilter(&args, &env);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
