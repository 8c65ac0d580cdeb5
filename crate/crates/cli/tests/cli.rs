use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mollify_cli::config::ExperimentConfig;

const QUADRATIC: &str = "\
[objective]
name = quadratic:2

[smoother]
kind = mean
n_samples = 64

[schedule]
c_beta = 0.2
iota = 0.5
c_gamma = 0.2
kappa = 0.2

[run]
theta0 = 1.0, -0.5
n_iterations = 100
seed = 42
record_every = 10

[output]
dir = out
";

fn mollify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mollify"))
        .args(args)
        .env_remove("MOLLIFY_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.conf");
    std::fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUADRATIC);
    let out = mollify(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 100 / 10 + 2);
    assert_eq!(
        lines[0],
        "n,beta,gamma,value,grad_norm,ess,lambda,theta_0,theta_1"
    );
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), 9);
    assert_eq!(first[0], "1");
    assert_eq!(first[7].parse::<f64>().unwrap(), 1.0);
    assert!(lines.last().unwrap().starts_with("100,"));

    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["final_theta"].as_array().unwrap().len(), 2);
    assert!(summary["running_min_grad_norm"].as_f64().unwrap() >= 0.0);
    assert_eq!(summary["verdict"]["level"], "FullConvergence");
    assert!(summary["wall_time_secs"].as_f64().is_some());
    assert!(summary["final_auc_risk"].is_null());
}

#[test]
fn rerun_reproduces_trace_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &QUADRATIC.replace("kind = mean", "kind = exp"));
    let read = || std::fs::read(dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(code(&mollify(&["run", cfg.to_str().unwrap()])), 0);
    let first = read();
    assert_eq!(code(&mollify(&["run", cfg.to_str().unwrap()])), 0);
    assert_eq!(first, read());
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUADRATIC);
    let out = mollify(&[
        "run",
        cfg.to_str().unwrap(),
        "--set",
        "run.record_every=25",
        "--iterations",
        "50",
        "--output",
        "other",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("other/trace.csv")).unwrap();
    // n = 1, 25, 50
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        QUADRATIC.replace("iota = 0.5", "iota = 1.5"),
        QUADRATIC.replace("seed = 42\n", ""),
        QUADRATIC.replace("theta0 = 1.0, -0.5", "theta0 = 1.0"),
        QUADRATIC.replace("quadratic:2", "banana"),
        QUADRATIC.replace("[run]", "[run]\nspeed = 3"),
    ] {
        let cfg = write_config(dir.path(), &bad);
        let out = mollify(&["run", cfg.to_str().unwrap()]);
        assert_eq!(code(&out), 2, "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    assert_eq!(code(&mollify(&["run", "/nonexistent/experiment.conf"])), 2);
    let cfg = write_config(dir.path(), QUADRATIC);
    assert_eq!(
        code(&mollify(&["run", cfg.to_str().unwrap(), "--set", "nope"])),
        2
    );
}

#[test]
fn bad_thread_env_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUADRATIC);
    let out = Command::new(env!("CARGO_BIN_EXE_mollify"))
        .args(["run", cfg.to_str().unwrap()])
        .env("MOLLIFY_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn estimator_failure_exits_3_with_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &QUADRATIC.replace("theta0 = 1.0, -0.5", "theta0 = 1e200, 0"),
    );
    let out = mollify(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("iteration 1"));
}

#[test]
fn validate_schedules_exit_codes() {
    let full = mollify(&[
        "validate-schedules",
        "--iota",
        "0.5",
        "--kappa",
        "0.2",
        "--alpha",
        "0",
    ]);
    assert_eq!(code(&full), 0);
    let stdout = String::from_utf8_lossy(&full.stdout);
    assert!(stdout.contains("FullConvergence"));
    assert!(stdout.contains("0.400000 < 0.500000"));

    let none = mollify(&[
        "validate-schedules",
        "--iota",
        "0.3",
        "--kappa",
        "0.2",
        "--alpha",
        "0",
    ]);
    assert_eq!(code(&none), 1);
    assert!(String::from_utf8_lossy(&none.stdout).contains("NoGuarantee"));

    let boundary = |c_beta: &str, smoother: &str| {
        mollify(&[
            "validate-schedules",
            "--iota",
            "0.5",
            "--kappa",
            "0.5",
            "--alpha",
            "0",
            "--mode",
            "deterministic",
            "--c-beta",
            c_beta,
            "--c-gamma",
            "1",
            "--smoother",
            smoother,
        ])
    };
    assert_eq!(code(&boundary("1", "exp")), 0);
    let over = boundary("3", "exp");
    assert_eq!(code(&over), 1);
    assert!(String::from_utf8_lossy(&over.stdout).contains("NoGuarantee"));
    let mean = boundary("1", "mean");
    assert_eq!(code(&mean), 1);
    assert!(String::from_utf8_lossy(&mean.stdout).contains("BoundaryCaseNeedsConstant"));

    let from_objective = mollify(&[
        "validate-schedules",
        "--iota",
        "0.5",
        "--kappa",
        "0.2",
        "--objective",
        "step",
    ]);
    assert_eq!(code(&from_objective), 0);

    assert_eq!(
        code(&mollify(&[
            "validate-schedules",
            "--iota",
            "x",
            "--kappa",
            "0.2"
        ])),
        2
    );
    assert_eq!(
        code(&mollify(&[
            "validate-schedules",
            "--iota",
            "0.5",
            "--kappa",
            "0.2"
        ])),
        2
    );
    assert_eq!(
        code(&mollify(&[
            "validate-schedules",
            "--iota",
            "1.5",
            "--kappa",
            "0.2",
            "--alpha",
            "0"
        ])),
        2
    );
}

#[test]
fn oracle_check_exit_codes() {
    let quad = mollify(&[
        "oracle-check",
        "--objective",
        "quadratic:2",
        "--gammas",
        "1,0.1",
        "--grid=-1:1:3",
    ]);
    assert_eq!(code(&quad), 0, "{}", String::from_utf8_lossy(&quad.stdout));
    assert!(String::from_utf8_lossy(&quad.stdout).contains("standard errors"));

    let step = mollify(&["oracle-check", "--objective", "step", "--verbose"]);
    assert_eq!(code(&step), 0, "{}", String::from_utf8_lossy(&step.stdout));

    assert_eq!(
        code(&mollify(&["oracle-check", "--objective", "quadratic:5"])),
        3
    );
    assert_eq!(
        code(&mollify(&[
            "oracle-check",
            "--objective",
            "quadratic",
            "--grid",
            "1:2"
        ])),
        2
    );
}

#[test]
fn auc_demo_reports_final_risk() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("demo");
    let out = mollify(&[
        "auc-demo",
        "--iterations",
        "100",
        "--seed",
        "3",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("final AUC risk"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["final_auc_risk"].as_f64().unwrap() <= 0.5);

    // the written config reruns to the same trace
    let cfg = ExperimentConfig::load(&out_dir.join("experiment.conf"), &[]).unwrap();
    assert_eq!(cfg.n_iterations, 100);
    let before = std::fs::read(out_dir.join("trace.csv")).unwrap();
    let rerun = mollify(&["run", out_dir.join("experiment.conf").to_str().unwrap()]);
    assert_eq!(code(&rerun), 0);
    assert_eq!(before, std::fs::read(out_dir.join("trace.csv")).unwrap());
}
