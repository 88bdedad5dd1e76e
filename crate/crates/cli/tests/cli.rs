use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn disambig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disambig")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth_tasks(dir: &Path) -> String {
    let path = dir.join("tasks.jsonl");
    let out = disambig(&["synth-tasks", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_tasks_writes_ten_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth_tasks(dir.path());
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 10);
}

#[test]
fn eval_prints_score_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.json");
    let g = dir.path().join("gen.json");
    std::fs::write(&r, r#"{"resources":{"vpc":"aws_vpc.vpc","subnet":"aws_subnet.subnet"},"topology":{"subnet":["vpc"]}}"#).unwrap();
    std::fs::write(&g, r#"{"resources":{"vpc":"aws_vpc.vpc"}}"#).unwrap();
    let out = disambig(&["eval", "--ref", r.to_str().unwrap(), "--gen", g.to_str().unwrap(), "--embedder", "fallback"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["structure_score"], 0.5);
    assert_eq!(report["ged"], 2.0);
    assert_eq!(report["timed_out"], false);

    let bad = disambig(&["eval", "--ref", r.to_str().unwrap(), "--gen", g.to_str().unwrap(), "--timeout-secs", "0"]);
    assert!(!bad.status.success());
}

#[test]
fn run_writes_outputs_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = synth_tasks(dir.path());
    let out_dir = dir.path().join("out");
    let out = disambig(&[
        "run", "--tasks", &tasks, "--method", "ours,direct", "--budget", "3", "--provider", "mock", "--seed", "4",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.lines().next().unwrap().starts_with("method"));
    assert!(table.contains("ours") && table.contains("direct"));
    for f in ["results.jsonl", "summary.json", "rounds.csv", "regen.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out_dir.join("results.jsonl")).unwrap().lines().count(), 20);
}

#[test]
fn run_rejects_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = synth_tasks(dir.path());
    let out = disambig(&["run", "--tasks", &tasks, "--method", "guess", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method"));
}

#[test]
fn run_with_mock_script() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    std::fs::write(
        &tasks,
        r#"{"id":"t","ambiguous_prompt":"a vpc","reference_spec":{"resources":{"vpc":"aws_vpc.vpc"}}}"#,
    )
    .unwrap();
    let script = dir.path().join("script.jsonl");
    // a one-structure pool asks nothing, then stalls after two barren regenerations
    let line = r#"{"kind":"candidate_spec","reply":"{\"resources\":{\"vpc\":\"aws_vpc.vpc\"}}"}"#;
    std::fs::write(&script, format!("{line}\n{line}\n{line}\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = disambig(&[
        "run", "--tasks", tasks.to_str().unwrap(), "--budget", "2", "--pool-size", "1", "--mock-script",
        script.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--reference", "ours",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = std::fs::read_to_string(out_dir.join("results.jsonl")).unwrap();
    let result: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(result["structure_score"], 1.0);
    assert_eq!(result["rounds_used"], 0);
    assert_eq!(result["regen_count"], 2);
}

#[test]
fn clarify_reads_answers_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_disambig"))
        .args(["clarify", "--intent", "Host a static website on S3.", "--budget", "2", "--seed", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"maybe\nyes\nno\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spec: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(spec["resources"].is_object());
}
