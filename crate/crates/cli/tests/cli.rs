//! End-to-end tests of the binary: pipeline, exit codes, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sitgraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sitgraph"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Builds the standard pipeline in a temp dir and returns its paths.
struct Artifacts {
    dir: TempDir,
    test: PathBuf,
    corpus: PathBuf,
    graph: PathBuf,
}

fn build_artifacts() -> Artifacts {
    let dir = TempDir::new().unwrap();
    let train = dir.path().join("train.json");
    let test = dir.path().join("test.json");
    let corpus = dir.path().join("corpus.jsonl");
    let graph = dir.path().join("graph.json");

    let out = sitgraph(
        dir.path(),
        &["gen-suite", "--seed", "42", "--flavor", "training", "--out", train.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{out:?}");
    let out = sitgraph(
        dir.path(),
        &["gen-suite", "--seed", "42", "--tasks", "50", "--out", test.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0);
    let out = sitgraph(
        dir.path(),
        &[
            "rollout",
            "--suite",
            train.to_str().unwrap(),
            "--out",
            corpus.to_str().unwrap(),
            "--max-steps",
            "80",
        ],
    );
    assert_eq!(code(&out), 0);
    let out = sitgraph(
        dir.path(),
        &[
            "build-graph",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            graph.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0);
    Artifacts { dir, test, corpus, graph }
}

#[test]
fn pipeline_builds_and_inspects_cleanly() {
    let a = build_artifacts();
    let out = sitgraph(a.dir.path(), &["inspect", "--graph", a.graph.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("invariants: ok"));
    assert!(text.contains("norm sum 1.000000000"));

    // Rebuilding from the same inputs produces byte-identical files.
    let graph2 = a.dir.path().join("graph2.json");
    let out = sitgraph(
        a.dir.path(),
        &[
            "build-graph",
            "--corpus",
            a.corpus.to_str().unwrap(),
            "--out",
            graph2.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(&a.graph).unwrap(),
        std::fs::read(&graph2).unwrap()
    );
}

#[test]
fn suggest_ranks_and_honors_modes() {
    let a = build_artifacts();
    let graph = a.graph.to_str().unwrap();

    // Weight path: the efficient transition outranks the time sink.
    let out = sitgraph(
        a.dir.path(),
        &["suggest", "--graph", graph, "--last-tool", "check_order", "--k", "2"],
    );
    assert_eq!(code(&out), 0);
    let suggestions: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(suggestions[0]["tool"], "ship_order");
    assert_eq!(suggestions[0]["mode"], "weight");
    assert_eq!(suggestions[1]["tool"], "check_faq");

    // Episodic path: the live state picks the matching repair.
    let out = sitgraph(
        a.dir.path(),
        &[
            "suggest",
            "--graph",
            graph,
            "--last-tool",
            "run_diagnostic",
            "--state",
            "symptoms: mobile data slow fix; facts: symptom=data_slow, diag_code=sim_card_failure",
        ],
    );
    assert_eq!(code(&out), 0);
    let suggestions: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(suggestions[0]["tool"], "apply_fix_sim_card");
    assert_eq!(suggestions[0]["mode"], "state");

    // weight_only ignores the state text entirely.
    let weight_only = |state: Option<&str>| -> String {
        let mut args = vec![
            "suggest",
            "--graph",
            graph,
            "--last-tool",
            "run_diagnostic",
            "--mode",
            "weight_only",
        ];
        if let Some(s) = state {
            args.extend(["--state", s]);
        }
        stdout(&sitgraph(a.dir.path(), &args))
    };
    assert_eq!(weight_only(None), weight_only(Some("facts: diag_code=sim_card_failure")));

    // Cold start: empty list, success.
    let out = sitgraph(
        a.dir.path(),
        &["suggest", "--graph", graph, "--last-tool", "no_such_tool"],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "[]");
}

#[test]
fn eval_reports_are_deterministic_and_empty_graph_matches_baseline() {
    let a = build_artifacts();
    let run = |name: &str, extra: &[&str]| -> (PathBuf, serde_json::Value) {
        let path = a.dir.path().join(name);
        let mut args = vec![
            "eval",
            "--suite",
            a.test.to_str().unwrap(),
            "--policy",
            "scripted",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let out = sitgraph(a.dir.path(), &args);
        assert_eq!(code(&out), 0, "{out:?}");
        let report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        (path, report)
    };

    let (p1, r1) = run("base1.json", &[]);
    let (p2, r2) = run("base2.json", &[]);
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(r1["mode"], "baseline");

    // An empty graph produces no suggestions: accuracy equals baseline.
    let empty = a.dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"config":{"c":1.0,"k":2,"only_successful":true,"embedder":{"kind":"hashed_bow","dim":256,"seed":42}},"nodes":[],"edges":[]}"#,
    )
    .unwrap();
    let (_, r3) = run("guided.json", &["--graph", empty.to_str().unwrap()]);
    assert_eq!(r1["accuracy"], r3["accuracy"]);
    assert_eq!(r2["per_task"], r3["per_task"]);

    // A real graph beats the baseline on this suite.
    let (_, r4) = run("full.json", &["--graph", a.graph.to_str().unwrap()]);
    assert!(r4["accuracy"].as_f64().unwrap() > r1["accuracy"].as_f64().unwrap());

    // Without --out, reports are content-addressed under reports/.
    let out = sitgraph(
        a.dir.path(),
        &[
            "eval",
            "--suite",
            a.test.to_str().unwrap(),
            "--policy",
            "scripted",
            "--seed",
            "7",
        ],
    );
    assert_eq!(code(&out), 0);
    let reports: Vec<_> = std::fs::read_dir(a.dir.path().join("reports"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(reports.len(), 1);
    assert_eq!(std::fs::read(&reports[0]).unwrap(), std::fs::read(&p1).unwrap());
}

#[test]
fn online_eval_grows_an_inspectable_graph() {
    let a = build_artifacts();
    let grown = a.dir.path().join("grown.json");
    let report = a.dir.path().join("online.json");
    let out = sitgraph(
        a.dir.path(),
        &[
            "eval",
            "--suite",
            a.test.to_str().unwrap(),
            "--policy",
            "scripted",
            "--online",
            "--seed",
            "7",
            "--graph-out",
            grown.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{out:?}");
    let out = sitgraph(a.dir.path(), &["inspect", "--graph", grown.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("invariants: ok"));

    // Online mode with the oracle judge stores successful routes only.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["mode"], "online:adaptive");
}

#[test]
fn exit_codes_for_bad_inputs() {
    let a = build_artifacts();

    // Hand-corrupted normalized weight: exit 4, names the edge.
    let corrupted = a.dir.path().join("corrupt.json");
    let text = std::fs::read_to_string(&a.graph).unwrap();
    let broken = text.replacen("\"norm_weight\": 1.0,", "\"norm_weight\": 0.9,", 1);
    assert_ne!(text, broken, "expected a unit norm weight to corrupt");
    std::fs::write(&corrupted, broken).unwrap();
    let out = sitgraph(a.dir.path(), &["inspect", "--graph", corrupted.to_str().unwrap()]);
    assert_eq!(code(&out), 4);

    // Unknown node lookups are not errors.
    let out = sitgraph(
        a.dir.path(),
        &["inspect", "--graph", a.graph.to_str().unwrap(), "--node", "missing_tool"],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("not present"));

    // Schema-invalid corpus: exit 2.
    let bad = a.dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"x\"}\n").unwrap();
    let out = sitgraph(
        a.dir.path(),
        &["build-graph", "--corpus", bad.to_str().unwrap(), "--out", "t.json"],
    );
    assert_eq!(code(&out), 2);

    // Corpus with nothing usable: exit 3.
    let failed = a.dir.path().join("failed.jsonl");
    std::fs::write(
        &failed,
        "{\"id\":\"x\",\"success\":false,\"events\":[{\"kind\":\"agent_msg\",\"content\":\"hi\"}]}\n",
    )
    .unwrap();
    let out = sitgraph(
        a.dir.path(),
        &["build-graph", "--corpus", failed.to_str().unwrap(), "--out", "t.json"],
    );
    assert_eq!(code(&out), 3);

    // The same corpus is usable with --include-failed.
    let out = sitgraph(
        a.dir.path(),
        &[
            "build-graph",
            "--corpus",
            failed.to_str().unwrap(),
            "--out",
            a.dir.path().join("t.json").to_str().unwrap(),
            "--include-failed",
        ],
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn simulate_replays_every_ideal_sequence() {
    let a = build_artifacts();
    let out = sitgraph(
        a.dir.path(),
        &["simulate", "--suite", a.test.to_str().unwrap(), "--seed", "42"],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("solved 50/50"));
}

#[test]
fn gen_suite_is_seed_deterministic() {
    let a = build_artifacts();
    let other = a.dir.path().join("test2.json");
    let out = sitgraph(
        a.dir.path(),
        &["gen-suite", "--seed", "42", "--tasks", "50", "--out", other.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&a.test).unwrap(), std::fs::read(&other).unwrap());
}
