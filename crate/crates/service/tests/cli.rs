use std::io::Write;
use std::process::{Command, Output, Stdio};

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_talkchart"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn repl_session() {
    let o = run(&["repl"], "sales by year\nmake it bigger\n:quit\nsort\n");
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with(
        "applied  {bindY, yAxis, field=Sales}\napplied  {bindX, xAxis, field=Year}\nrecommended chartType=bar\n"
    ));
    assert!(!out.contains("{sort"));
}

#[test]
fn quit_exits_cleanly() {
    let o = run(&[], ":quit\n");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn pronoun_needs_clarification() {
    let out = stdout(&run(&["repl"], "make it bigger\n"));
    assert!(out.starts_with("clarification_needed"), "{out}");
}

#[test]
fn out_flag_writes_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let o = run(&["repl", "--out", spec.to_str().unwrap()], "sales by year\n");
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&spec).unwrap()).unwrap();
    assert_eq!(v["chartType"], "bar");
}

#[test]
fn missing_data_file_fails() {
    let o = run(&["--data", "/nonexistent/cars.csv", "repl"], "");
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/cars.csv"));
}

#[test]
fn corpus_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let o = run(&["corpus", "--count", "50", "--out", path.to_str().unwrap()], "");
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 50);
    let o = run(&["bench", "--records", path.to_str().unwrap()], "");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("50"));
}
