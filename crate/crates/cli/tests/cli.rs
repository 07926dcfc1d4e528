use std::path::Path;
use std::process::{Command, Output};

fn maplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maplan"))
        .args(args)
        .output()
        .unwrap()
}

fn gen(dir: &Path, extra: &[&str]) -> String {
    let path = dir.join("task.json").to_string_lossy().into_owned();
    let mut args = vec![
        "gen",
        "--agents",
        "3",
        "--locations",
        "3",
        "--packages",
        "2",
        "--seed",
        "4",
        "-o",
        &path,
    ];
    args.extend_from_slice(extra);
    assert!(maplan(&args).status.success());
    path
}

#[test]
fn plan_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let task = gen(dir.path(), &[]);
    let plan = dir.path().join("plan.json").to_string_lossy().into_owned();

    let oracle = maplan(&["oracle", &task]);
    assert!(oracle.status.success());
    let oracle = String::from_utf8(oracle.stdout).unwrap();

    for alg in ["mad-astar", "astar", "pp-astar", "mafs"] {
        let out = maplan(&[
            "plan",
            &task,
            "--algorithm",
            alg,
            "--json",
            "--plan-out",
            &plan,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{alg}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["outcome"], "solved");
        let cost = report["cost"].as_u64().unwrap();
        if alg != "mafs" {
            assert!(
                oracle.contains(&cost.to_string()),
                "{alg} cost {cost}, oracle said {oracle}"
            );
        }
        let v = maplan(&["validate", &task, &plan]);
        assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stdout));
        assert!(String::from_utf8_lossy(&v.stdout).contains(&cost.to_string()));
    }
}

#[test]
fn unsolvable_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let task = gen(dir.path(), &["--unsolvable"]);
    assert_eq!(maplan(&["plan", &task]).status.code(), Some(10));
    assert_eq!(
        maplan(&["plan", &task, "--algorithm", "mafs"])
            .status
            .code(),
        Some(10)
    );
}

#[test]
fn optimal_mode_rejects_ff() {
    let dir = tempfile::tempdir().unwrap();
    let task = gen(dir.path(), &[]);
    let out = maplan(&[
        "plan",
        &task,
        "--algorithm",
        "mad-astar",
        "--heuristic",
        "ff",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn crash_with_robustness() {
    let dir = tempfile::tempdir().unwrap();
    let task = gen(dir.path(), &["--backup", "--placement", "depots"]);
    let out = maplan(&["plan", &task, "--robustness", "--fail", "0@2", "--json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = maplan(&["plan", &task, "--fail", "0@2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn classify_lists_agents() {
    let dir = tempfile::tempdir().unwrap();
    let task = gen(dir.path(), &[]);
    let out = maplan(&["classify", &task]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn bad_task_json_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"variables": [], "init": [], "goal": [], "actions": [{"name": 3}], "agents": []}"#,
    )
    .unwrap();
    let out = maplan(&["plan", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("actions"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bench_suite() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    std::fs::write(
        &suite,
        r#"{"instances": [{"id": "a", "generate": {"domain": "logistics", "agents": 2, "locations": 2, "packages": 1, "seed": 0}}],
            "algorithms": ["mad-astar", "astar", "pp-astar"], "heuristic": "hmax"}"#,
    )
    .unwrap();
    let json = dir.path().join("out.json");
    let out = maplan(&[
        "bench",
        suite.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
}
