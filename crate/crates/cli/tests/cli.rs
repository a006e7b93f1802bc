//! End-to-end runs of the `firkit` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CV_MODEL: &str = r#"{"n":2,"m":1,"F":[[1,1],[0,1]],"H":[[1,0]],
    "Q":[[0.0025,0.005],[0.005,0.01]],"R":[[1]]}"#;

fn workspace(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cv.json"), CV_MODEL).unwrap();
    std::fs::write(dir.path().join("exp.json"), config).unwrap();
    dir
}

fn firkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firkit"))
        .args(args)
        .arg("--config")
        .arg(dir.join("exp.json"))
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// `value` column of the `diff` row for the pair `a`, `b`.
fn diff(csv: &str, a: &str, b: &str) -> f64 {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0] == "diff" && ((c[1] == a && c[2] == b) || (c[1] == b && c[2] == a)))
        .unwrap_or_else(|| panic!("no diff row for {a}/{b}"))[3]
        .parse()
        .unwrap()
}

#[test]
fn kf_run_writes_one_row_per_step() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"kf"}],"sim":{"seed":3,"steps":25,"x0":[0,1]}}"#,
    );
    let out = firkit(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,filter,xhat_1,xhat_2,err_1,err_2"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 25);
    assert!(rows[0].starts_with("1,kf,"));
    assert!(rows[24].starts_with("25,kf,"));
}

#[test]
fn fir_run_starts_at_the_horizon_and_honours_out() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"ufir","horizon":8},{"kind":"rhkf","horizon":5}],
            "sim":{"seed":3,"steps":30,"x0":[0,1]},"output":"ignored.csv"}"#,
    );
    let target = dir.path().join("run.csv");
    let out = firkit(dir.path(), &["run", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!dir.path().join("ignored.csv").exists());
    let csv = std::fs::read_to_string(target).unwrap();
    let ufir: Vec<_> = csv.lines().filter(|l| l.contains(",ufir8,")).collect();
    let rhkf: Vec<_> = csv.lines().filter(|l| l.contains(",rhkf5,")).collect();
    assert_eq!(ufir.len(), 23);
    assert!(ufir[0].starts_with("8,"));
    assert_eq!(rhkf.len(), 26);
    assert!(stdout(&out).contains("ufir8: 23 estimates"));
}

#[test]
fn missing_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"model":"nowhere.json","filters":[{"kind":"kf"}],"sim":{"seed":1,"steps":10,"x0":[0,1]}}"#,
    )
    .unwrap();
    let out = firkit(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[config]: cannot read model"));
}

#[test]
fn bad_arguments_exit_with_two() {
    let dir = workspace("{}");
    let out = firkit(dir.path(), &["run", "--seed", "minus-one"]);
    assert_eq!(out.status.code(), Some(2));
    let out = firkit(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invalid config JSON"));
}

#[test]
fn unobservable_horizon_is_a_numerical_failure() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"ufir","horizon":1}],"sim":{"seed":1,"steps":30,"x0":[0,1]}}"#,
    );
    let out = firkit(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.starts_with("error[not-observable]:"), "{err}");
    assert!(err.contains("at step 1"), "{err}");
}

#[test]
fn sweep_is_reproducible_and_seed_sensitive() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"kf"},{"kind":"rhkf"},{"kind":"ufir"}],
            "sim":{"seed":11,"steps":60,"runs":20,"x0":[0,1]},"horizons":[4,8,16]}"#,
    );
    let a = firkit(dir.path(), &["sweep"]);
    let b = firkit(dir.path(), &["sweep"]);
    let c = firkit(dir.path(), &["sweep", "--seed", "12"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let csv = stdout(&a);
    assert!(csv.starts_with("N,filter,component,mse,runs,seed\n"));
    // 3 horizons × 3 filters × (2 components + trace)
    assert_eq!(csv.lines().count(), 1 + 27);
    let summary = stderr(&a);
    assert!(summary.contains("ufir: N_opt = "), "{summary}");
    assert!(summary.contains("rhkf: N_min = "), "{summary}");
}

#[test]
fn sweep_rejects_per_filter_mismatch() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"ufir","mismatch":{"r_scale":2}}],
            "sim":{"seed":1,"steps":60,"x0":[0,1]},"horizons":[4]}"#,
    );
    let out = firkit(dir.path(), &["sweep"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_reports_expected_distances() {
    let dir = workspace(
        r#"{"model":"cv.json",
            "filters":[
              {"kind":"kf"},
              {"kind":"kf","label":"kf-copy"},
              {"kind":"ufir","horizon":12},
              {"kind":"ufir","horizon":12,"label":"ufir-wrong-r","mismatch":{"r_scale":100}},
              {"kind":"rhkf","horizon":30},
              {"kind":"rhkf","horizon":3}
            ],
            "sim":{"seed":5,"steps":80,"runs":20,"x0":[0,1]}}"#,
    );
    let out = firkit(dir.path(), &["compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(diff(&csv, "kf", "kf-copy"), 0.0);
    assert_eq!(diff(&csv, "ufir12", "ufir-wrong-r"), 0.0);
    assert!(diff(&csv, "rhkf30", "kf") < diff(&csv, "rhkf3", "kf"));
}

#[test]
fn compare_rejects_duplicate_labels() {
    let dir = workspace(
        r#"{"model":"cv.json","filters":[{"kind":"rhkf","horizon":4},{"kind":"rhkf","horizon":4}],
            "sim":{"seed":1,"steps":60,"x0":[0,1]}}"#,
    );
    let out = firkit(dir.path(), &["compare"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("duplicate filter label"));
}
