use std::path::Path;
use std::process::Command;

fn isgp(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_isgp")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn generate_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
version = 1
eta = 0.3
folds = 3
seeds = [1, 2]
eval_stride = 5

[data]
source = "csv"
path = "data.csv"
"#,
    )
    .unwrap();
    isgp(&["generate", "--seed", "4", "--out", d.join("data.csv").to_str().unwrap()]);
    assert!(read(&d.join("data.csv")).starts_with("x0,x1,label\n"));

    let out = d.join("results");
    let o = out.to_str().unwrap();
    isgp(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        o,
        "--seed",
        "9",
        "--policies",
        "isgp,gp_always",
        "--ordering",
        "sequential_clusters",
    ]);
    let effective = isgp::experiment::ExperimentConfig::from_path(&out.join("config.toml")).unwrap();
    assert_eq!(effective.seeds, vec![9]);
    assert_eq!(effective.folds, 3);
    assert_eq!(effective.eta, 0.3);
    assert_eq!(
        effective.policies,
        vec![isgp::PolicyKind::Isgp, isgp::PolicyKind::GpAlways]
    );

    let summaries = read(&out.join("summaries.csv"));
    assert_eq!(summaries.lines().count(), 1 + 3 * 2);
    let records = read(&out.join("records.jsonl"));
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], 9);
    assert_eq!(first["round"], 1);
    assert_eq!(read(&out.join("failures.json")).trim(), "[]");

    let figs = d.join("figs");
    isgp(&["report", o, "--out", figs.to_str().unwrap()]);
    assert!(read(&figs.join("f1.svg")).starts_with("<svg"));
    assert!(read(&figs.join("queries.svg")).starts_with("<svg"));
    assert!(figs.join("aggregate.csv").exists());
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        isgp(&["run", "--out", out.to_str().unwrap(), "--folds", "2", "--eta", "0.4"]);
        (read(&out.join("metrics.csv")), read(&out.join("records.jsonl")))
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bad_flags_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_isgp"))
        .args(["run", "--out", "/tmp/unused", "--policies", "oracle"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_isgp"))
        .args(["run", "--out", "/tmp/unused", "--eta", "1.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
