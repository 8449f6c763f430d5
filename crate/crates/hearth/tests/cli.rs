use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

fn hearth() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hearth"))
}

#[test]
fn run_scenario_writes_both_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scenario1", "scenario2"] {
        let out = hearth().args(["run-scenario", name, "--out"]).arg(dir.path()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let human = std::fs::read_to_string(dir.path().join(format!("{name}.transcript.txt"))).unwrap();
        let jsonl = std::fs::read_to_string(dir.path().join(format!("{name}.events.jsonl"))).unwrap();
        assert_eq!(human.lines().filter(|l| l.starts_with('#')).count(), jsonl.lines().count());
        for line in jsonl.lines() {
            let e: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(e["seq"].is_u64() && e["kind"].is_string());
        }
    }
    let s2 = std::fs::read_to_string(dir.path().join("scenario2.transcript.txt")).unwrap();
    assert!(s2.contains("projected 120 Mbps"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = hearth().args(["run-scenario", "scenario9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_scene_names_the_path() {
    let out = hearth().args(["serve", "--scene", "/nowhere/room.json", "--port", "0"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nowhere/room.json"));
}

#[test]
fn serve_answers_on_the_configured_port() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("demo.toml");
    std::fs::write(&config, "port = 0\nscene = \"builtin:scenario2\"\nprovider = \"mock\"\n").unwrap();
    let mut child = hearth()
        .args(["serve", "--config"])
        .arg(&config)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().rsplit(' ').next().unwrap().to_string();
    let client = reqwest::blocking::Client::new();
    let r = client.post(format!("{url}/sessions")).json(&serde_json::json!({ "user_name": "Eason" })).send().unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(r.status().as_u16(), 201);
}

#[test]
fn repl_chats_and_exits_on_eof() {
    let mut child = hearth()
        .args(["repl", "--scene", "builtin:scenario1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let mut stdin = child.stdin.take().unwrap();
        writeln!(stdin, "hello").unwrap();
        writeln!(stdin, "Can you help me to count the number of people in the room and identify who they are?").unwrap();
        writeln!(stdin, "/events").unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Hello! How can I help you today?"));
    assert!(text.contains("There are 5 people in the room."));
    assert!(text.contains("trace assistant: Do you require any assistance?"));
}
