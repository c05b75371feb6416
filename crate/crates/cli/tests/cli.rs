use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn mmplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmplan")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn report(domain: &str, extra: &[&str]) -> (Output, serde_json::Value) {
    let path = scratch(&format!("{domain}.{}.json", extra.join("")));
    let file = fixture(domain);
    let mut args = vec!["solve", file.to_str().unwrap(), "--report", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = mmplan(&args);
    let text = std::fs::read_to_string(&path).expect("report written");
    (out, serde_json::from_str(&text).unwrap())
}

fn chosen_action(report: &serde_json::Value, state: &str, time: u64) -> String {
    report["chosen_policy"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["state"] == state && r["time"] == time)
        .map(|r| r["action"].as_str().unwrap().to_string())
        .expect("row present")
}

#[test]
fn small_insulin_steals() {
    for exact in [false, true] {
        let extra: &[&str] = if exact { &["--exact"] } else { &[] };
        let (out, r) = report("insulin_small.domain", extra);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(chosen_action(&r, "s0", 0), "steal");
        let chosen = r["chosen"].as_u64().unwrap() as usize;
        assert_eq!(r["policies"][chosen]["non_acceptability"].as_f64(), Some(0.0));
        assert_eq!(r["policies"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn expanded_insulin_respects_budget() {
    let (out, r) = report("insulin_expanded.domain", &[]);
    assert!(out.status.success());
    let budget = r["budget"].as_f64().unwrap();
    assert_eq!(budget, 18.5);
    for p in r["policies"].as_array().unwrap() {
        assert!(p["expected_cost"].as_f64().unwrap() <= budget);
        assert!(p["goal_probability"].as_f64().unwrap() > 0.0);
    }
    let stats = &r["stats"];
    assert!(stats["expansions"].as_u64() <= stats["reachable_state_times"].as_u64());
}

#[test]
fn reports_are_deterministic() {
    let (_, a) = report("insulin_expanded_equal.domain", &[]);
    let (_, b) = report("insulin_expanded_equal.domain", &[]);
    assert_eq!(a, b);
}

#[test]
fn malformed_input_exits_2() {
    let bad = scratch("bad.domain");
    std::fs::write(&bad, "{\"schema_version\": 1, \"states\": [\"a\"],").unwrap();
    let out = mmplan(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let missing = scratch("does-not-exist.domain");
    assert_eq!(mmplan(&["solve", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn tiny_budget_exits_1() {
    let text = std::fs::read_to_string(fixture("insulin_expanded.domain")).unwrap();
    let text = text.replacen("\"budget\": 18.5", "\"budget\": 1", 1);
    assert!(text.contains("\"budget\": 1,") || text.contains("\"budget\": 1\n"));
    let path = scratch("tight.domain");
    std::fs::write(&path, text).unwrap();
    let out = mmplan(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn capacity_exits_3() {
    let file = fixture("insulin_expanded_equal.domain");
    let out = mmplan(&["solve", file.to_str().unwrap(), "--vector-cap", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dot_output_is_stable() {
    let file = fixture("insulin_small.domain");
    let mut texts = Vec::new();
    for i in 0..2 {
        let dot = scratch(&format!("small{i}.dot"));
        let out = mmplan(&["graph", file.to_str().unwrap(), "--dot", dot.to_str().unwrap()]);
        assert!(out.status.success());
        texts.push(std::fs::read_to_string(dot).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert!(texts[0].starts_with("digraph"));
    assert!(texts[0].contains("->"));
}

#[test]
fn random_oracle_check_agrees() {
    let out = mmplan(&["oracle-check", "--random", "40", "--seed", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 differ"));
}

#[test]
fn file_oracle_check_agrees() {
    let file = fixture("insulin_small_equal.domain");
    let out = mmplan(&["oracle-check", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("agree"));
}
