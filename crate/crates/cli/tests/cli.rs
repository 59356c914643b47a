use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtree_core::{fixtures, TreeDocument};
use serde_json::Value;
use tempfile::TempDir;

fn dtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtree"))
        .args(args)
        .output()
        .expect("run dtree")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn figure2(dir: &TempDir) -> PathBuf {
    let p = dir.path().join("figure2.json");
    fs::write(&p, TreeDocument::from_tree(&fixtures::figure2_tree()).to_json()).unwrap();
    p
}

#[test]
fn net1_compiles_to_one_enode() {
    let out = dtree(&["compile", "fixture:net1", "--json"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["enodes"], 1);
    assert!((v["eu"].as_f64().unwrap() - 0.73).abs() < 1e-9);
}

#[test]
fn with_oracle_reports_ratio() {
    let out = dtree(&["compile", "fixture:net1", "--with-oracle", "--json"]);
    let v = stdout_json(&out);
    assert!((v["optimality_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn ddn_depth_one_writes_the_same_files_as_dd() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("m.json");
    assert_eq!(code(&dtree(&["oracle", "gen", "--seed", "5", "-o", path_str(&model)])), 0);
    let a = dir.path().join("dd.json");
    let b = dir.path().join("ddn.json");
    assert_eq!(code(&dtree(&["compile", path_str(&model), "--algo", "dd", "-o", path_str(&a)])), 0);
    let out = dtree(&["compile", path_str(&model), "--algo", "ddn", "--depth", "1", "-o", path_str(&b)]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let sa: Value = serde_json::from_slice(&fs::read(a.with_extension("stats.json")).unwrap()).unwrap();
    let sb: Value = serde_json::from_slice(&fs::read(b.with_extension("stats.json")).unwrap()).unwrap();
    assert_eq!(sa["selections"], sb["selections"]);
    assert_eq!(sa["inference_calls"], sb["inference_calls"]);
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    dtree(&["oracle", "gen", "--seed", "7", "-o", path_str(&a)]);
    dtree(&["oracle", "gen", "--seed", "7", "-o", path_str(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(code(&dtree(&["validate", path_str(&a)])), 0);
}

#[test]
fn walks_on_example_tree() {
    let dir = TempDir::new().unwrap();
    let t = figure2(&dir);
    for (responses, status) in [("a1,b1", "decided"), ("a3,c1", "decided"), ("stop", "stopped_early")] {
        let out = dtree(&["walk", path_str(&t), "--responses", responses, "--json"]);
        assert_eq!(code(&out), 0, "{responses}");
        let v = stdout_json(&out);
        assert_eq!(v["decisions"], serde_json::json!(["d1"]), "{responses}");
        assert_eq!(v["status"], status);
    }
}

#[test]
fn illegal_walk_response_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let t = figure2(&dir);
    assert_eq!(code(&dtree(&["walk", path_str(&t), "--responses", "a9"])), 2);
    assert_eq!(code(&dtree(&["walk", path_str(&t), "--responses", "a1"])), 2);
}

#[test]
fn interactive_walk_reprompts() {
    use std::io::Write;
    use std::process::Stdio;
    let dir = TempDir::new().unwrap();
    let t = figure2(&dir);
    let mut child = Command::new(env!("CARGO_BIN_EXE_dtree"))
        .args(["walk", path_str(&t), "--interactive", "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"zz\na1\nb1\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a value"));
    assert_eq!(stdout_json(&out)["decisions"], serde_json::json!(["d1"]));
}

#[test]
fn eval_checks_compiled_tree() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.json");
    dtree(&["compile", "fixture:net3", "-o", path_str(&t)]);
    let out = dtree(&["eval", path_str(&t), "fixture:net3", "--json"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["dt_compiles"], true);
    assert!(v["difference"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn eval_rejects_tree_from_other_model() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.json");
    dtree(&["compile", "fixture:net1", "-o", path_str(&t)]);
    assert_eq!(code(&dtree(&["eval", path_str(&t), "fixture:net2"])), 2);
}

#[test]
fn eval_flags_hand_labelled_tree() {
    // The example tree's decision sets are illustrative, not computed.
    let dir = TempDir::new().unwrap();
    let t = figure2(&dir);
    let out = dtree(&["eval", path_str(&t), "fixture:net3"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("m.json");
    dtree(&["oracle", "gen", "--seed", "1", "-o", path_str(&model)]);
    let mut v: Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    v["chance_nodes"][0]["cpt"][0] = Value::from(7.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_vec(&v).unwrap()).unwrap();
    let out = dtree(&["validate", path_str(&bad), "--json"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["valid"], false);

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&dtree(&["validate", path_str(&garbage)])), 2);
    assert_eq!(code(&dtree(&["validate", "fixture:nope"])), 2);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&dtree(&["compile", "fixture:net1", "--depth", "0"])), 2);
    assert_eq!(code(&dtree(&["compile", "fixture:net1", "--algo", "bfs"])), 2);
    assert_eq!(code(&dtree(&["compile", "fixture:net1", "--eu-fraction", "1.5"])), 2);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"algorithm": "ddn", "depth": 2, "max_enodes": 1}"#).unwrap();
    let v = stdout_json(&dtree(&["compile", "fixture:net3", "--config", path_str(&cfg), "--json"]));
    assert_eq!(v["enodes"], 1);
    let v = stdout_json(&dtree(&[
        "compile", "fixture:net3", "--config", path_str(&cfg), "--max-enodes", "3", "--json",
    ]));
    assert!(v["enodes"].as_u64().unwrap() > 1);
    fs::write(&cfg, r#"{"depht": 2}"#).unwrap();
    assert_eq!(code(&dtree(&["compile", "fixture:net3", "--config", path_str(&cfg)])), 2);
}

#[test]
fn oracle_commands() {
    let out = dtree(&["oracle", "policy-eu", "fixture:net1", "--json"]);
    assert!((stdout_json(&out)["optimal_policy_eu"].as_f64().unwrap() - 0.73).abs() < 1e-9);

    let dir = TempDir::new().unwrap();
    let t = dir.path().join("opt.json");
    let out = dtree(&["oracle", "optimal-dtree", "fixture:net2", "--max-enodes", "1", "-o", path_str(&t), "--json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["enodes"], 1);
    assert_eq!(code(&dtree(&["eval", path_str(&t), "fixture:net2"])), 0);

    let out = dtree(&["oracle", "property3", "fixture:net2", "--json"]);
    assert_eq!(code(&out), 0);
    assert_ne!(stdout_json(&out)["verdict"], "FAIL");
}

#[test]
fn export_dot_writes_graph() {
    let dir = TempDir::new().unwrap();
    let t = figure2(&dir);
    let dot = dir.path().join("t.dot");
    assert_eq!(code(&dtree(&["export-dot", path_str(&t), "-o", path_str(&dot)])), 0);
    let text = fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("dashed"));
}
