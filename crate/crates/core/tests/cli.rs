use std::process::{Command, Output};

use consensus_aladin::diagnostics::CSV_HEADER;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consensus-aladin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn sensor_run_has_the_expected_shape() {
    let csv = stdout(&[
        "run", "--problem", "sensor-allocation", "--N", "20", "--algo", "bfgs-aladin", "--rho", "100",
        "--seed", "42",
    ]);
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 200);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 8);
        assert_eq!(row[0], (k + 1).to_string());
        assert_eq!(row[3], "", "no reference, no energy");
        assert_eq!(row[5], "200");
        assert_eq!(row[6], "400");
        assert_eq!(row[7], "0");
    }
    let footer = csv.lines().last().unwrap();
    assert!(footer.starts_with("# summary,rounds=200,"), "{footer}");
    assert!(footer.contains("floats_up_total=40000"));
    assert!(footer.contains("floats_down_total=80000"));
    assert!(footer.ends_with("reference=none"));
}

#[test]
fn quadratic_run_reaches_tolerance_and_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = cli(&[
        "run", "--problem", "quadratic", "--N", "3", "--n", "2", "--algo", "reduced-aladin", "--seed", "7",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&path).unwrap();
    let rows = rows(&csv);
    let residual: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(residual.iter().any(|&r| r <= 1e-8));
    assert!(rows.iter().all(|r| !r[3].is_empty()), "energy present");
    assert!(csv.trim_end().ends_with("reference=global"));
}

#[test]
fn identical_configs_give_identical_bytes_for_any_thread_count() {
    let base = [
        "run", "--problem", "sensor-allocation", "--N", "8", "--algo", "bfgs-aladin", "--max-iter", "40",
        "--seed", "3",
    ];
    let one = stdout(&[&base[..], &["--threads", "1"]].concat());
    let again = stdout(&[&base[..], &["--threads", "1"]].concat());
    let four = stdout(&[&base[..], &["--threads", "4"]].concat());
    let default = stdout(&base);
    assert_eq!(one, again);
    assert_eq!(one, four);
    assert_eq!(one, default);
}

#[test]
fn seeds_give_distinct_instances() {
    let a = stdout(&["run", "--problem", "quadratic", "--N", "3", "--n", "2", "--seed", "1", "--max-iter", "5"]);
    let b = stdout(&["run", "--problem", "quadratic", "--N", "3", "--n", "2", "--seed", "2", "--max-iter", "5"]);
    assert_ne!(a, b);
}

#[test]
fn compare_columns_equal_single_runs() {
    let common = ["--problem", "quadratic", "--N", "4", "--n", "3", "--seed", "5", "--max-iter", "30"];
    let merged = stdout(&[&["compare"], &common[..], &["--algo", "bfgs-aladin,admm-dual-first"]].concat());
    assert_eq!(merged.lines().next(), Some("round,bfgs-aladin,admm-dual-first"));
    let merged_rows = rows(&merged);
    assert_eq!(merged_rows.len(), 30);
    for (col, algo) in [(1, "bfgs-aladin"), (2, "admm-dual-first")] {
        let single = stdout(&[&["run"], &common[..], &["--algo", algo]].concat());
        let expected: Vec<String> = rows(&single).into_iter().map(|r| r[1].clone()).collect();
        let got: Vec<String> = merged_rows.iter().map(|r| r[col].clone()).collect();
        assert_eq!(got, expected, "{algo}");
    }
    let single = stdout(&[&["compare"], &common[..], &["--algo", "reduced-aladin"]].concat());
    let run = stdout(&[&["run"], &common[..], &["--algo", "reduced-aladin"]].concat());
    let from_run: Vec<String> = rows(&run).into_iter().map(|r| r[1].clone()).collect();
    let from_compare: Vec<String> = rows(&single).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(from_compare, from_run);
}

#[test]
fn stop_tolerance_ends_the_run_early() {
    let csv = stdout(&[
        "run", "--problem", "quadratic", "--N", "3", "--n", "2", "--algo", "bfgs-aladin", "--stop-tol", "1e-6",
    ]);
    let rows = rows(&csv);
    assert!(rows.len() < 200);
    assert!(rows.last().unwrap()[1].parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn hessian_schedule_flag_is_accepted() {
    let csv = stdout(&[
        "run", "--problem", "quadratic", "--N", "3", "--n", "2", "--algo", "bfgs-aladin", "--hessian-schedule",
        "2", "--max-iter", "10",
    ]);
    assert_eq!(rows(&csv).len(), 10);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    for args in [
        &["run", "--rho", "-1"][..],
        &["run", "--max-iter", "0"],
        &["run", "--problem", "sensor-allocation", "--n", "4"],
        &["run", "--algo", "reduced-aladin", "--hessian-schedule", "3"],
        &["run", "--algo", "bfgs-aladin", "--hessian-schedule", "1"],
        &["run", "--algo", "newton"],
        &["run", "--problem", "rosenbrock"],
    ] {
        let out = cli(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn solver_failures_exit_with_code_three() {
    let out = cli(&[
        "run", "--problem", "sensor-allocation", "--N", "2", "--max-iter", "3", "--tol", "1e-300",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("agent 0") && msg.contains("round 1"), "{msg}");
}
