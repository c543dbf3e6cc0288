use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn schmidt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schmidt")).args(args).env_remove("SCHMIDT_SEED").output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn play(config: &Path, out: &Path, seed: &str) -> Output {
    schmidt(&["play", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed])
}

#[test]
fn play_verify_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("one_d.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = play(&cfg, &a, "4");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"won\":true"));
    assert_eq!(play(&cfg, &b, "4").status.code(), Some(0));

    for f in ["one_d.transcript.jsonl", "one_d.summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs between replays");
    }

    let t = a.join("one_d.transcript.jsonl");
    let v = schmidt(&["verify", t.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));

    // move Alice's first ball off Bob's
    let text = std::fs::read_to_string(&t).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let i = lines.iter().position(|l| l.contains("\"player\":\"alice\"")).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[i]).unwrap();
    let round = rec["round"].as_u64().unwrap();
    rec["center"][0] = serde_json::Value::String("7".into());
    lines[i] = rec.to_string();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let v = schmidt(&["verify", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    let report = String::from_utf8_lossy(&v.stdout);
    assert!(report.contains(&format!("first bad round: {round}")), "{report}");
}

#[test]
fn infeasible_parameters_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(configs().join("one_d.toml")).unwrap().replace("alpha = \"1/4\"", "alpha = \"9/10\"");
    std::fs::write(&cfg, text).unwrap();
    let out = play(&cfg, dir.path(), "0");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = play(&dir.path().join("none.toml"), dir.path(), "0");
    assert_eq!(out.status.code(), Some(4));
}
