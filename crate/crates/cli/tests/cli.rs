use std::path::Path;
use std::process::{Command, Output};

fn codeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codeval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn mini(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/mini")
        .join(file)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&codeval(&[])), 1);
    assert_eq!(code(&codeval(&["score"])), 1);
    assert_eq!(code(&codeval(&["perturb", "--input", "x", "--transform", "shuffle", "--out", "y"])), 1);
    assert_eq!(code(&codeval(&["passk", "--executions", "x", "--format", "xlsx"])), 1);
    assert_eq!(code(&codeval(&["--help"])), 0);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "metrics = [\"cbs_f1\"]\n");
    let out = dir.path().join("s.csv");
    let o = codeval(&["--config", &cfg, "score", "--input", &mini("instances.jsonl"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("embedding backend"));
    let bad = write(dir.path(), "c.yaml", "");
    assert_eq!(code(&codeval(&["--config", &bad, "passk", "--executions", &mini("executions.jsonl")])), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = codeval(&["score", "--input", "/nonexistent/instances.jsonl", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let broken = write(dir.path(), "i.jsonl", "{not json}\n");
    let o = codeval(&["score", "--input", &broken, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn unreachable_backend_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // Port 9 (discard) is closed on test hosts, so the health check fails.
    let cfg = write(
        dir.path(),
        "c.toml",
        "[embedding.backend]\nkind = \"remote\"\nurl = \"http://127.0.0.1:9\"\ntimeout_secs = 2\n",
    );
    let out = dir.path().join("s.csv");
    let o = codeval(&["--config", &cfg, "score", "--input", &mini("instances.jsonl"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists(), "no partial output after fail-fast");
}

#[test]
fn misaligned_tables_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let before = write(
        dir.path(),
        "b.csv",
        "task_id,model_id,sample_index,em,flags\nt1,m,0,1,\nt2,m,0,0,\n",
    );
    let after = write(dir.path(), "a.csv", "task_id,model_id,sample_index,em,flags\nt1,m,0,1,\n");
    let o = codeval(&[
        "meta",
        "robustness",
        "--scores",
        &before,
        "--after",
        &format!("x={after}"),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(t2, m, 0)"));
}

#[test]
fn score_writes_table_summary_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scores.csv");
    let o = codeval(&[
        "--seed",
        "42",
        "--config",
        &mini("config.toml"),
        "score",
        "--input",
        &mini("instances.jsonl"),
        "--executions",
        &mini("executions.jsonl"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("| alpha | 10 | 0.800 |"), "{summary}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 21);
    // The one unparseable candidate is flagged, not dropped.
    assert!(csv.lines().any(|l| l.starts_with("mbpp/0,beta,0,") && l.contains("syntax errors")));
    let prov = std::fs::read_to_string(dir.path().join("scores.provenance.json")).unwrap();
    assert!(prov.contains("\"seed\": 42"));
}

#[test]
fn passk_lists_k_columns() {
    let o = codeval(&["passk", "--executions", &mini("executions.jsonl"), "--k", "1,2"]);
    assert_eq!(code(&o), 0);
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| model_id | n_tasks | pass@1 | pass@2 | note |"));
    assert!(md.contains("| beta | 10 | 0.500 | n/a |"));
}
