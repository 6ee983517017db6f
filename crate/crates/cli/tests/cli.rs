use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn throttlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_throttlab")).args(args).current_dir(root()).output().unwrap()
}

fn stdout_of(args: &[&str]) -> String {
    let out = throttlab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    throttlab(args).status.code().unwrap()
}

#[test]
fn toy_outputs_match_golden() {
    assert_eq!(stdout_of(&["toy", "identical"]), golden("toy_identical.txt"));
    assert_eq!(stdout_of(&["toy", "dominating"]), golden("toy_dominating.txt"));
}

#[test]
fn toy_accepts_other_sizes() {
    let out = stdout_of(&["toy", "identical", "--k", "7", "--r0", "2", "--r1", "3"]);
    assert!(out.contains("agrees with enumeration: yes"), "{out}");
}

#[test]
fn oracle_outputs_match_golden() {
    assert_eq!(stdout_of(&["oracle", "--instance", "fixtures/thm51.json"]), golden("oracle_joint.txt"));
    assert_eq!(stdout_of(&["oracle", "--instance", "fixtures/thm52.json"]), golden("oracle_split.txt"));
    assert_eq!(
        stdout_of(&["oracle", "--instance", "fixtures/thm51.json", "--scheme", "pair_balanced", "--format", "json"]),
        golden("oracle_joint_pair.json")
    );
}

#[test]
fn oracle_flags_override_the_file() {
    let out = stdout_of(&["oracle", "--instance", "fixtures/identical_k4.json", "--scheme", "pair_bernoulli:0.5", "--convention", "unweighted"]);
    assert!(out.contains("(69/16)"), "{out}");
}

#[test]
fn report_matches_golden() {
    assert_eq!(stdout_of(&["report", "crates/cli/tests/golden/smoke.csv"]), golden("report_smoke.txt"));
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let a = stdout_of(&["simulate", "--config", "fixtures/study_smoke.json"]);
    let b = stdout_of(&["simulate", "--config", "fixtures/study_smoke.json"]);
    let c = stdout_of(&["simulate", "--config", "fixtures/study_smoke.json", "--seed", "8"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("scenario_id,n_queries,n_advertisers,quota_frac,"));
}

#[test]
fn simulate_writes_json_and_files() {
    let dir = std::env::temp_dir().join(format!("throttlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rows.json");
    let out = throttlab(&["simulate", "--config", "fixtures/study_smoke.json", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn invalid_input_exits_with_two() {
    assert_eq!(code(&["toy", "identical", "--r0", "6", "--r1", "5"]), 2);
    assert_eq!(code(&["toy", "dominating", "--b0", "4,5", "--b1", "5,6"]), 2);
    assert_eq!(code(&["oracle", "--instance", "fixtures/missing.json"]), 2);
    assert_eq!(code(&["oracle", "--instance", "fixtures/thm51.json", "--quota-mode", "split", "--quota", "3"]), 2);
    assert_eq!(code(&["simulate", "--config", "fixtures/thm51.json"]), 2);
    assert_eq!(code(&["report", "fixtures/thm51.json"]), 2);
}

#[test]
fn enumeration_budget_exits_with_three() {
    assert_eq!(code(&["oracle", "--instance", "fixtures/thm51.json", "--max-masks", "1"]), 3);
    assert_eq!(code(&["oracle", "--instance", "fixtures/thm51.json", "--max-assignments", "2"]), 3);
}

#[test]
fn worker_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_throttlab"))
        .args(["simulate", "--config", "fixtures/study_smoke.json"])
        .env("THROTTLAB_WORKERS", "zero")
        .current_dir(root())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_csv_is_rejected() {
    let path = std::env::temp_dir().join(format!("throttlab-empty-{}.csv", std::process::id()));
    std::fs::write(&path, "scenario_id,n_queries,n_advertisers,quota_frac,mu0,mu1,v,p_x,treatment_type,scheme,throttle_mode,convention,n_outer,n_inner,tau_star,tau_star_se,mean_est,bias,rel_bias,rel_bias_se,variance,var_ratio,seed\n").unwrap();
    assert_eq!(code(&["report", path.to_str().unwrap()]), 2);
    std::fs::remove_file(path).unwrap();
}
