use std::path::Path;
use std::process::{Command, Output};

const SWEEP: &str = r#"{
    "mode": "sweep",
    "rho_spec": {"kind": "uniform-interval", "lo": 0.0, "hi": 1.0, "role": "edge-weight"},
    "xi_spec": {"kind": "two-point", "values": [1.0, 2.0], "probs": [0.5, 0.5], "role": "recovery-rate"},
    "lambda_grid": [3.0],
    "n_grid": [8, 12, 16],
    "replicas": 10,
    "t_max_rule": {"fixed": 30.0},
    "master_seed": 12
}"#;

fn cpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpsim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn meanfield_reports_threshold() {
    let out = cpsim(&[
        "meanfield",
        "--rho",
        r#"{"kind":"constant","values":[1],"role":"edge-weight"}"#,
        "--xi",
        r#"{"kind":"two-point","values":[1,2],"probs":[0.5,0.5],"role":"recovery-rate"}"#,
        "--lambda",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.333333"), "{text}");
    assert!(text.contains("0.309016"), "{text}");
}

#[test]
fn bad_config_exits_with_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SWEEP.replace(r#""replicas": 10"#, r#""replica": 10"#);
    let path = write(dir.path(), "bad.json", &bad);
    let out = cpsim(&["--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("replica"), "{err}");

    let wrong_role = SWEEP.replace(r#""role": "recovery-rate""#, r#""role": "edge-weight""#);
    let path = write(dir.path(), "role.json", &wrong_role);
    let out = cpsim(&["--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("xi_spec"));
}

#[test]
fn config_mode_runs_without_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let csv = dir.path().join("rows.csv");
    let out = cpsim(&["--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = cpsim::sweep::load_sweep_csv(&csv).unwrap();
    assert_eq!(rows.len(), 30);
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("# cpsim-schema v1\nn,lambda,env_seed,replica,seed,extinction_time,capped_at,event_count,final_count\n"));
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SWEEP);
    let a = cpsim(&["sweep", "--config", &cfg, "--seed", "1"]);
    let b = cpsim(&["sweep", "--config", &cfg, "--seed", "2"]);
    let c = cpsim(&["sweep", "--config", &cfg, "--seed", "1", "--threads", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn failed_verdict_exits_with_one() {
    // With a zero horizon no walk can exit, so the exit probabilities tie.
    let out = cpsim(&["theory-check", "--lemma", "walk", "--horizon", "0", "--walks", "100"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("fail"));
}

#[test]
fn passing_check_exits_with_zero() {
    let out = cpsim(&["theory-check", "--lemma", "coupon", "--walks", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# cpsim-schema v1\ncheck,parameter,estimate,stderr,bound,verdict"), "{text}");
}

#[test]
fn drift_check_rejects_pair_without_gap() {
    let out = cpsim(&[
        "theory-check",
        "--lemma",
        "drift",
        "--rho",
        r#"{"kind":"constant","values":[1],"role":"edge-weight"}"#,
        "--xi",
        r#"{"kind":"constant","values":[1],"role":"recovery-rate"}"#,
        "--lambda",
        "2",
        "--a",
        "0.25",
        "--b",
        "0.35",
        "--n",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("0.95238"));
}

#[test]
fn simulate_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let out = cpsim(&[
        "simulate",
        "--rho",
        r#"{"kind":"constant","values":[1],"role":"edge-weight"}"#,
        "--xi",
        r#"{"kind":"two-point","values":[1,2],"probs":[0.5,0.5],"role":"recovery-rate"}"#,
        "--n",
        "20",
        "--lambda",
        "3",
        "--t-max",
        "5",
        "--replicas",
        "3",
        "--env-mode",
        "stratified",
        "--sample-every",
        "1",
        "--samples-out",
        samples.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&samples).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("# cpsim-schema v1"));
    assert_eq!(lines.next(), Some("replica,t,count,A_1,A_2"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,0,20,10,10"), "{first}");
}
