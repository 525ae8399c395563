//! Drives the `anmod` binary end to end: exit codes, emitted files, and
//! the byte-level reproducibility contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn anmod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anmod"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary spawns")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_history_summary_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let out = anmod(
        dir.path(),
        &["run", "--config", cfg.to_str().unwrap(), "--out", "qr"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("SUCCESS"));

    let run_dir = dir.path().join("qr");
    for file in ["history.jsonl", "summary.txt", "config_snapshot.toml"] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }

    // The history line key order is part of the file contract.
    let history = fs::read_to_string(run_dir.join("history.jsonl")).unwrap();
    let first = history.lines().next().unwrap();
    let positions: Vec<usize> = [
        "\"k\":",
        "\"x\":",
        "\"y\":",
        "\"y_pred\":",
        "\"cost\":",
        "\"status\":",
    ]
    .iter()
    .map(|key| {
        first
            .find(key)
            .unwrap_or_else(|| panic!("{key} missing from {first}"))
    })
    .collect();
    assert!(
        positions.windows(2).all(|w| w[0] < w[1]),
        "key order drifted: {first}"
    );
}

#[test]
fn run_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let args = [
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        "qr",
    ];

    assert_eq!(anmod(dir.path(), &args).status.code(), Some(0));
    let first = fs::read(dir.path().join("qr/history.jsonl")).unwrap();
    assert_eq!(anmod(dir.path(), &args).status.code(), Some(0));
    let second = fs::read(dir.path().join("qr/history.jsonl")).unwrap();
    assert_eq!(
        first, second,
        "same config and seed must replay byte-identically"
    );
}

#[test]
fn invalid_settings_exit_one_with_a_named_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let out = anmod(
        dir.path(),
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--adjustment-rate",
            "0",
            "--out",
            "qr",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("adjustment_rate"),
        "stderr should name the violated setting: {}",
        stderr_of(&out)
    );
    assert!(
        !dir.path().join("qr").exists(),
        "no output directory on config error"
    );
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = anmod(dir.path(), &["run", "--config", "no_such_file.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no_such_file.toml"));
}

#[test]
fn batch_of_zero_writes_an_empty_summary_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let out = anmod(
        dir.path(),
        &["batch", "--config", cfg.to_str().unwrap(), "--n", "0"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let summary =
        fs::read_to_string(dir.path().join("runs/qubit_resonator/batch_summary.txt")).unwrap();
    assert!(summary.contains("runs: 0"));
    assert!(summary.contains("success: 0/0"));
}

#[test]
fn batch_is_reproducible_for_a_fixed_master_seed() {
    let cfg = config("qubit_resonator.toml");
    let args = [
        "batch",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "4",
        "--seed",
        "11",
    ];

    let mut summaries = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = anmod(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
        let base = dir.path().join("runs/qubit_resonator");
        let mut blob = fs::read(base.join("batch_summary.txt")).unwrap();
        for i in 0..4 {
            blob.extend(fs::read(base.join(format!("run_{i:03}/history.jsonl"))).unwrap());
        }
        summaries.push(blob);
    }
    assert_eq!(
        summaries[0], summaries[1],
        "fixed master seed must reproduce the batch"
    );
}

#[test]
fn batch_without_a_count_anywhere_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // The capacitance config declares no [sampling] section.
    let cfg = config("capacitance.toml");
    let out = anmod(dir.path(), &["batch", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("--n"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn sweep_rejects_bad_points_with_notes_and_fits_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let out = anmod(
        dir.path(),
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--variable",
            "l_res",
            "--values",
            "5000,6000,7000,8000,9000,15000",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("points: 5 accepted, 1 rejected"),
        "stdout: {text}"
    );
    assert!(
        text.contains("value 15000 rejected: outside bounds"),
        "stdout: {text}"
    );
    assert!(text.contains("f_res:"), "stdout: {text}");

    let csv = fs::read_to_string(dir.path().join("runs/qubit_resonator/sweep_l_res.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "header plus five accepted points");
    assert!(csv.lines().next().unwrap().starts_with("l_res,"));
}

#[test]
fn sweep_with_an_unknown_variable_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    let out = anmod(
        dir.path(),
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--variable",
            "bogus",
            "--values",
            "1,2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("bogus"));
}

#[test]
fn report_renders_csvs_and_charts_for_every_target_and_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    assert_eq!(
        anmod(
            dir.path(),
            &["run", "--config", cfg.to_str().unwrap(), "--out", "qr"]
        )
        .status
        .code(),
        Some(0)
    );
    let history = dir.path().join("qr/history.jsonl");
    let out = anmod(
        dir.path(),
        &["report", "--history", history.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let run_dir = dir.path().join("qr");
    assert!(run_dir.join("report_targets.csv").exists());
    assert!(run_dir.join("report_variables.csv").exists());
    // Five targeted parameters and five design variables, one chart each.
    for name in ["f_res", "f_qb", "alpha", "chi", "kappa_res"] {
        let svg = fs::read_to_string(run_dir.join(format!("param_{name}.svg"))).unwrap();
        assert!(
            svg.contains("stroke-dasharray"),
            "{name} chart lacks its target line"
        );
    }
    for name in ["l_res", "L_qb", "w_qb", "w_res_qb", "l_res_tl"] {
        assert!(
            run_dir.join(format!("var_{name}.svg")).exists(),
            "{name} chart missing"
        );
    }

    // Relative-error columns cover every targeted parameter in declaration order.
    let targets = fs::read_to_string(run_dir.join("report_targets.csv")).unwrap();
    assert_eq!(
        targets.lines().next().unwrap(),
        "k,f_res,f_qb,alpha,chi,kappa_res"
    );
}

#[test]
fn report_on_a_single_iteration_history_writes_single_row_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("perfect_model.toml");
    assert_eq!(
        anmod(
            dir.path(),
            &["run", "--config", cfg.to_str().unwrap(), "--out", "pm"]
        )
        .status
        .code(),
        Some(0)
    );

    // Trim the history to its first record: a run observed only once.
    let history_path = dir.path().join("pm/history.jsonl");
    let first_line = {
        let full = fs::read_to_string(&history_path).unwrap();
        full.lines().next().unwrap().to_owned()
    };
    fs::write(&history_path, format!("{first_line}\n")).unwrap();

    let out = anmod(
        dir.path(),
        &["report", "--history", history_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    for file in ["report_targets.csv", "report_variables.csv"] {
        let text = fs::read_to_string(dir.path().join("pm").join(file)).unwrap();
        assert_eq!(
            text.lines().count(),
            2,
            "{file} should be a header plus one row"
        );
    }
}

#[test]
fn report_names_the_corrupt_history_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubit_resonator.toml");
    assert_eq!(
        anmod(
            dir.path(),
            &["run", "--config", cfg.to_str().unwrap(), "--out", "qr"]
        )
        .status
        .code(),
        Some(0)
    );

    let history_path = dir.path().join("qr/history.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&history_path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    assert!(
        lines.len() >= 2,
        "need at least two records to corrupt the second"
    );
    lines[1] = "{not json".to_owned();
    fs::write(&history_path, lines.join("\n") + "\n").unwrap();

    let out = anmod(
        dir.path(),
        &["report", "--history", history_path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("line 2"),
        "stderr should name the corrupt line: {}",
        stderr_of(&out)
    );
}

#[test]
fn every_shipped_config_runs_to_success() {
    let dir = tempfile::tempdir().unwrap();
    for (name, iterations) in [
        ("perfect_model.toml", 1),
        ("qubit_resonator.toml", 2),
        ("two_qubit.toml", 3),
        ("capacitance.toml", 2),
        ("t1_limit.toml", 4),
    ] {
        let cfg = config(name);
        let out = anmod(
            dir.path(),
            &["run", "--config", cfg.to_str().unwrap(), "--out", name],
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name} stderr: {}",
            stderr_of(&out)
        );
        let text = stdout_of(&out);
        assert!(
            text.contains(&format!("SUCCESS after {iterations} iteration")),
            "{name}: expected convergence after {iterations} iterations, got: {text}"
        );
    }
}
