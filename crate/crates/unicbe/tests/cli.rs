use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use unicbe::cli::{parse_config, read_curves, CliError};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_unicbe"));
    c.env_remove("UNICBE_SEED");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn example_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

const MINIMAL: &str = r#"{
  "models": 4,
  "samples": 10,
  "budget": 50,
  "eval_every": 10,
  "seeds": [3, 4],
  "strategies": [
    { "strategy": { "name": "unicbe" } },
    { "strategy": { "name": "random" } }
  ]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(config: &Path, out: &Path, extra: &[&str]) -> String {
    let o = bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out.join("curves.csv")).unwrap()
}

#[test]
fn minimal_run_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let out = tmp.path().join("out");
    let text = run_ok(&cfg, &out, &["--jobs", "1"]);
    assert!(text.starts_with("# manifest: manifest.json\n"));
    let rows = read_curves(&out.join("curves.csv")).unwrap();
    // strategies × (seeds + 1) × ⌈T / eval_every⌉
    assert_eq!(rows.len(), 2 * 3 * 5);
    assert!(rows.iter().filter(|r| r.seed == "mean").all(|r| r.t % 10 == 0));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([3, 4]));
    assert!(manifest["wall_clock_secs"].as_f64().unwrap() >= 0.0);
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
    assert_eq!(manifest["config"]["budget"], 50);

    let scores: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scores.json")).unwrap()).unwrap();
    assert_eq!(scores["manifest"], "manifest.json");
    let est = scores["strategies"][0]["runs"][0]["estimate"].as_array().unwrap();
    let mean = est.iter().map(|v| v.as_f64().unwrap()).sum::<f64>() / est.len() as f64;
    assert!((mean - 1.0).abs() < 1e-9);
}

#[test]
fn seed_override_changes_curves_and_flag_beats_env() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let base = run_ok(&cfg, &tmp.path().join("a"), &[]);
    let flagged = run_ok(&cfg, &tmp.path().join("b"), &["--seed", "99"]);
    assert_ne!(base, flagged);

    let o = bin()
        .env("UNICBE_SEED", "99")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path().join("c"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let from_env = std::fs::read_to_string(tmp.path().join("c/curves.csv")).unwrap();
    assert_eq!(from_env, flagged);

    let o = bin()
        .env("UNICBE_SEED", "99")
        .args(["run", "--seed", "3", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path().join("d"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(tmp.path().join("d/curves.csv")).unwrap(), base);
}

#[test]
fn rerunning_a_manifest_reproduces_curves_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let first = run_ok(&cfg, &tmp.path().join("a"), &["--seed", "17", "--jobs", "2"]);
    let again = run_ok(&tmp.path().join("a/manifest.json"), &tmp.path().join("b"), &["--jobs", "1"]);
    assert_eq!(first, again);
}

#[test]
fn replay_paths_resolve_against_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    run_ok(&example_data("replay.json"), &out, &[]);
    // The manifest holds an absolute path, so it runs from anywhere.
    let again = run_ok(&out.join("manifest.json"), &tmp.path().join("again"), &[]);
    assert_eq!(again, std::fs::read_to_string(out.join("curves.csv")).unwrap());
}

fn expect_exit(config_text: &str, code: i32, needle: &str) {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", config_text);
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(o.status.code(), Some(code), "{err}");
    assert!(err.contains(needle), "{needle:?} not in {err}");
}

#[test]
fn invalid_strategy_name_exits_2_with_field_path() {
    expect_exit(&MINIMAL.replace("\"random\"", "\"roulette\""), 2, "strategies[1].strategy");
}

#[test]
fn schema_and_validation_errors_exit_2() {
    expect_exit(&MINIMAL.replace("\"budget\": 50", "\"budget\": 50, \"budgett\": 1"), 2, "budgett");
    expect_exit(&MINIMAL.replace("\"budget\": 50", "\"budget\": 0"), 2, "budget");
    expect_exit(&MINIMAL.replace("\"eval_every\": 10", "\"eval_every\": \"ten\""), 2, "eval_every");
    expect_exit("{ not json", 2, "invalid config");
}

#[test]
fn judge_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let responses = write(
        tmp.path(),
        "responses.json",
        r#"{"instructions": {"q": "say hi"}, "outputs": {"a": {"q": "hi"}, "b": {"q": "hello"}, "c": {"q": "hey"}}}"#,
    );
    let text = format!(
        r#"{{
  "models": 3, "samples": 1, "budget": 3, "seeds": [0],
  "judge": {{ "kind": "external", "command": "false", "responses": {:?} }},
  "strategies": [{{ "strategy": {{ "name": "random" }} }}]
}}"#,
        responses.display().to_string()
    );
    expect_exit(&text, 3, "judge failure");
}

#[test]
fn parse_config_reports_paths() {
    assert!(parse_config(MINIMAL, None).is_ok());
    let bad = MINIMAL.replace("{ \"name\": \"unicbe\" }", "{ \"name\": \"unicbe\", \"alpha\": 0.5 }");
    match parse_config(&bad, None) {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "strategies[0].strategy"),
        other => panic!("{other:?}"),
    }
    let bad = MINIMAL.replace("\"seeds\": [3, 4]", "\"seeds\": []");
    match parse_config(&bad, None) {
        Err(e @ CliError::Config { .. }) => assert_eq!(e.exit_code(), 2),
        other => panic!("{other:?}"),
    }
}

fn ingest(path: &Path, extra: &[&str]) -> std::process::Output {
    bin().arg("ingest").arg(path).args(extra).output().unwrap()
}

#[test]
fn ingest_summarizes_the_fixture() {
    let o = ingest(&fixture("tiny.jsonl"), &["--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["models"], 2);
    assert_eq!(s["samples"], 2);
    assert_eq!(s["records"], 2);
    assert_eq!(s["coverage"], 1.0);
    assert_eq!(s["duplicates"], 1);

    let o = ingest(&fixture("tiny.jsonl"), &[]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("coverage:       1.0000"), "{text}");
}

#[test]
fn tie_becomes_one_half_on_export() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("export.jsonl");
    let o = ingest(&fixture("tiny.jsonl"), &["--export", out.to_str().unwrap()]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let s2 = lines.iter().find(|l| l["sample"] == "s2").unwrap();
    assert_eq!(s2["r"], 0.5);
}

#[test]
fn ingest_errors_name_lines() {
    let o = ingest(&fixture("malformed.jsonl"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = ingest(&fixture("conflict.jsonl"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("conflicting") && err.contains("line 2") && err.contains("line 1"), "{err}");
}

#[test]
fn ingest_export_round_trip_is_idempotent() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first.jsonl");
    let second = tmp.path().join("second.jsonl");
    let a = ingest(&example_data("arena_log.jsonl"), &["--json", "--export", first.to_str().unwrap()]);
    let b = ingest(&first, &["--json", "--export", second.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

fn curves_file(dir: &Path, name: &str, rows: &[(&str, u64, f64)]) -> PathBuf {
    let mut text = String::from("# manifest: manifest.json\nstrategy,seed,T,delta,r_s,r_p,beta_acc,beta_con,beta_sca\n");
    for (label, t, delta) in rows {
        text += &format!("{label},mean,{t},{delta},0,0,0,0,0\n");
    }
    write(dir, name, &text)
}

fn savings(a: &Path, b: &Path, extra: &[&str]) -> String {
    let o = bin().arg("savings").arg(a).arg(b).args(extra).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn savings_table_cases() {
    let tmp = TempDir::new().unwrap();
    let fast = curves_file(tmp.path(), "fast.csv", &[("m", 100, 0.5), ("m", 200, 0.1), ("m", 300, 0.05)]);
    let slow = curves_file(
        tmp.path(),
        "slow.csv",
        &[("b", 100, 0.5), ("b", 200, 0.3), ("b", 300, 0.2), ("b", 400, 0.1), ("b", 500, 0.05)],
    );

    let same = savings(&fast, &fast, &["--target", "0.1"]);
    assert!(same.lines().nth(1).unwrap().trim_end().ends_with(" 0%"), "{same}");

    let half = savings(&fast, &slow, &["--target", "0.1", "--target", "0.01"]);
    let lines: Vec<&str> = half.lines().collect();
    assert!(lines[1].trim_end().ends_with(" 50%"), "{half}");
    assert!(lines[2].contains("n/a"), "{half}");

    let csv = tmp.path().join("t.csv");
    savings(&fast, &slow, &["--target", "0.1", "--csv", csv.to_str().unwrap()]);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "delta,0.1,200,400,50");
}

#[test]
fn savings_needs_a_label_for_multi_strategy_files() {
    let tmp = TempDir::new().unwrap();
    let f = curves_file(tmp.path(), "two.csv", &[("x", 10, 0.1), ("y", 10, 0.1)]);
    let o = bin().arg("savings").arg(&f).arg(&f).args(["--target", "0.1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let out = savings(&f, &f, &["--target", "0.1", "--label-a", "x", "--label-b", "y"]);
    assert!(out.contains(" 0%"));
}

fn verify(u: &str, v: &str) -> (i32, String) {
    let o = bin().args(["verify", u, v]).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap())
}

#[test]
fn verify_prints_pass() {
    let (code, out) = verify("4", "4");
    assert_eq!(code, 0);
    assert!(out.starts_with("PASS") && out.contains("minimizer (1,1,1,1)") && out.contains("runner-up 6"), "{out}");
    let (code, out) = verify("8", "3");
    assert_eq!(code, 0);
    assert!(out.starts_with("PASS"));
    let (code, out) = verify("3", "0");
    assert_eq!(code, 0);
    assert!(out.contains("minimizer (0,0,0)"), "{out}");
    let (code, _) = verify("0", "3");
    assert_eq!(code, 2);
}
