//! End-to-end runs of the binary: the asset-build → classify workflow,
//! determinism of outputs, and exit codes for the failure modes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_belldiag")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("belldiag-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn symmetries_prints_group_orders() {
    let dir = tempdir("sym");
    let out = run_in(&dir, &["symmetries", "--d", "2"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "24");
    let out3 = run_in(&dir, &["symmetries", "--d", "3"]);
    assert_eq!(String::from_utf8_lossy(&out3.stdout).trim(), "432");
}

#[test]
fn full_workflow_runs_and_is_deterministic() {
    let dir = tempdir("workflow");
    // kernel
    let out = run_in(
        &dir,
        &["build-kernel", "--d", "2", "--out", "kernel.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // witnesses, twice: byte-identical stores
    for name in ["w1.jsonl", "w2.jsonl"] {
        let out = run_in(
            &dir,
            &[
                "gen-witnesses",
                "--d",
                "2",
                "--count",
                "6",
                "--restarts",
                "5",
                "--seed",
                "9",
                "--kernel",
                "kernel.json",
                "--validation-products",
                "200",
                "--out",
                name,
            ],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        std::fs::read(dir.join("w1.jsonl")).unwrap(),
        std::fs::read(dir.join("w2.jsonl")).unwrap()
    );

    // sample then classify from file
    let out = run_in(
        &dir,
        &[
            "sample", "--d", "2", "--region", "simplex", "--n", "200", "--seed", "3", "--out",
            "states.csv",
        ],
    );
    assert!(out.status.success());
    let out = run_in(
        &dir,
        &[
            "classify",
            "--input",
            "states.csv",
            "--witnesses",
            "w1.jsonl",
            "--kernel",
            "kernel.json",
            "--out",
            "results.csv",
            "--evaluate-all",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("SEP"));
    assert!(stdout.contains("FREE"));

    // volumes + summaries
    let out = run_in(
        &dir,
        &[
            "volumes",
            "--d",
            "2",
            "--region",
            "simplex",
            "--n",
            "300",
            "--seed",
            "4",
            "--witnesses",
            "w1.jsonl",
            "--kernel",
            "kernel.json",
            "--out",
            "vol.csv",
            "--orbit-audit",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("vol.summary.txt").exists());
    assert!(dir.join("vol.summary.json").exists());
    let audit_line = String::from_utf8_lossy(&out.stdout);
    assert!(audit_line.contains("orbit audit"));
    assert!(audit_line.contains("0 conflicts"));

    // compare on the evaluate-all results
    let out = run_in(
        &dir,
        &["compare", "--input", "results.csv", "--out", "table.txt"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("criterion-A"));

    // identical volumes rerun produces identical files
    let before = std::fs::read(dir.join("vol.csv")).unwrap();
    let out = run_in(
        &dir,
        &[
            "volumes",
            "--d",
            "2",
            "--region",
            "simplex",
            "--n",
            "300",
            "--seed",
            "4",
            "--witnesses",
            "w1.jsonl",
            "--kernel",
            "kernel.json",
            "--out",
            "vol.csv",
        ],
    );
    assert!(out.status.success());
    assert_eq!(before, std::fs::read(dir.join("vol.csv")).unwrap());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn lattice_study_emits_columnar_table() {
    let dir = tempdir("lattice");
    let out = run_in(
        &dir,
        &["lattice-study", "--d", "2", "--steps", "2,3", "--seed", "1"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("steps"));
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn lattice_sample_writes_grid_points() {
    let dir = tempdir("lattice-sample");
    let out = run_in(
        &dir,
        &[
            "sample",
            "--d",
            "2",
            "--region",
            "lattice",
            "--steps",
            "2",
            "--range-top",
            "1.0",
            "--out",
            "grid.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(dir.join("grid.csv")).unwrap();
    let rows = body
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('c'))
        .count();
    // the 2-step grid over the full d=2 simplex has exactly 10 valid nodes
    assert_eq!(rows, 10);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_asset_exits_with_code_three() {
    let dir = tempdir("missing");
    let out = run_in(
        &dir,
        &[
            "volumes",
            "--d",
            "2",
            "--region",
            "simplex",
            "--n",
            "10",
            "--seed",
            "1",
            "--witnesses",
            "nope.jsonl",
            "--kernel",
            "nope.json",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempdir("config");
    // unsupported dimension
    let out = run_in(&dir, &["symmetries", "--d", "9"]);
    assert_eq!(out.status.code(), Some(2));
    // clap usage error
    let out = run_in(&dir, &["volumes", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
