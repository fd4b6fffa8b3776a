use std::path::PathBuf;
use std::process::{Command, Output};

fn btp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btp")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("btp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn data_rows(path: &PathBuf) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = btp(&["no-such-experiment"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));
}

#[test]
fn invalid_parameter_names_the_key() {
    let out = btp(&["marginal", "--t", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`t`"));
    let out = btp(&["exit", "--domain", "square:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`domain`"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg = scratch("bad.conf");
    std::fs::write(&cfg, "experiment = marginal\nwidth = 3\n").unwrap();
    let out = btp(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
}

#[test]
fn config_file_with_flag_override() {
    let cfg = scratch("run.conf");
    let csv = scratch("run.csv");
    std::fs::write(&cfg, format!("# marginal run\nexperiment = marginal\nn = 50\nf = cube\nout = {}\n", csv.display())).unwrap();
    let out = btp(&["--config", cfg.to_str().unwrap(), "--n", "3000", "--x", "-0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# experiment: marginal"));
    assert!(text.contains("n=3000"));
    assert!(text.contains("x=-0.2"));
    assert!(text.contains("quantity,theoretical,estimate,stderr,n,z_score,pass"));
}

#[test]
fn identical_runs_give_identical_data_rows() {
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    for path in [&a, &b] {
        let out = btp(&["marginal", "--n", "5000", "--seed", "17", "--f", "gauss", "--x", "0.5", "--out", path.to_str().unwrap()]);
        assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    }
    assert_eq!(data_rows(&a), data_rows(&b));
    let c = scratch("c.csv");
    btp(&["marginal", "--n", "5000", "--seed", "18", "--f", "gauss", "--x", "0.5", "--out", c.to_str().unwrap()]);
    assert_ne!(data_rows(&a), data_rows(&c));
}

#[test]
fn failing_check_gives_nonzero_status() {
    // A tolerance far below the roundoff of the exact-solution residual.
    let csv = scratch("fail.csv");
    let out = btp(&["thm4", "--f", "square", "--tol", "1e-15", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
