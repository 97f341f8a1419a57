use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use factcheck_core::FactcheckDocument;

fn e2e(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e").join(file)
}

fn factcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factcheck"))
        .args(args)
        .env_remove("FACTCHECK_CONFIG")
        .output()
        .expect("spawn factcheck")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_fixture(out_dir: &Path) -> Vec<FactcheckDocument> {
    let config = e2e("pipeline.toml");
    let input = e2e("inputs.jsonl");
    let out = factcheck(&["run", "--config", path(&config), "--input", path(&input), "--out-dir", path(out_dir)]);
    stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn run_writes_a_reproducible_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let docs = run_fixture(tmp.path());
    let ids: Vec<_> = docs.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["douglas", "eiffel", "boiling"]);
    for file in ["output.jsonl", "revisions.jsonl", "evidence_manifest.json", "metadata.json", "config.json"] {
        assert!(tmp.path().join(file).is_file(), "{file} missing");
    }
    let again = tempfile::tempdir().unwrap();
    run_fixture(again.path());
    for file in ["output.jsonl", "revisions.jsonl", "evidence_manifest.json"] {
        let a = std::fs::read(tmp.path().join(file)).unwrap();
        let b = std::fs::read(again.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn single_document_run_and_failure_exit_code() {
    let config = e2e("pipeline.toml");
    let out = factcheck(&[
        "run",
        "--config",
        path(&config),
        "--id",
        "solo",
        "--question",
        "Where is the Eiffel Tower and when was it finished?",
        "--response",
        "The Eiffel Tower is located in Paris. It was completed in 1889.",
    ]);
    let doc: FactcheckDocument = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(doc.id, "solo");
    assert_eq!(doc.claims().count(), 2);

    let out = factcheck(&["run", "--config", path(&config), "--question", "q", "--response", ""]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty response"));
}

#[test]
fn eval_baselines_on_pipeline_output() {
    let tmp = tempfile::tempdir().unwrap();
    run_fixture(tmp.path());
    let data = tmp.path().join("output.jsonl");
    let json = tmp.path().join("reports.json");
    let out = factcheck(&[
        "eval",
        "--data",
        path(&data),
        "--adapter",
        "always-true",
        "--adapter",
        "always-false",
        "--subtasks",
        "s4",
        "--json",
        path(&json),
    ]);
    let text = stdout(&out);
    assert!(text.contains("== s4-verification =="), "{text}");
    let row = |name: &str| text.lines().find(|l| l.starts_with(name)).unwrap().split_whitespace().skip(1).collect::<Vec<_>>();
    assert_eq!(row("always-true")[1], "1.000");
    assert_eq!(row("always-false")[4], "1.000");
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(reports.is_array() || reports.is_object());

    let out = factcheck(&["eval", "--data", path(&data), "--adapter", "no-such-system"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn select_data_writes_kept_documents() {
    let tmp = tempfile::tempdir().unwrap();
    run_fixture(tmp.path());
    let gold = tmp.path().join("gold.jsonl");
    std::fs::write(&gold, "{\"id\":\"douglas\",\"answer\":\"Justice Brennan.\"}\n").unwrap();
    let kept = tmp.path().join("kept.jsonl");
    let out = factcheck(&[
        "select-data",
        "--input",
        path(&tmp.path().join("output.jsonl")),
        "--gold",
        path(&gold),
        "--config",
        path(&e2e("pipeline.toml")),
        "--min-chars",
        "10",
        "--out",
        path(&kept),
    ]);
    let decisions: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(decisions.len(), 3);
    assert_eq!(decisions[0]["rejection"]["reason"], "factscore-too-high");
    let kept = std::fs::read_to_string(kept).unwrap();
    let ids: Vec<String> =
        kept.lines().map(|l| serde_json::from_str::<FactcheckDocument>(l).unwrap().id).collect();
    assert_eq!(ids, ["boiling"]);
}

#[test]
fn export_of_an_empty_store() {
    let tmp = tempfile::tempdir().unwrap();
    let out = factcheck(&["export", "--data-dir", path(tmp.path())]);
    assert_eq!(stdout(&out), "");
    assert!(String::from_utf8_lossy(&out.stderr).contains("exported 0 documents"));
}

#[test]
fn serve_config_resolves_paths_and_tokens() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("serve.toml");
    std::fs::write(
        &cfg,
        r#"
data_dir = "data"

[[annotators]]
id = "ann-a"
token = "secret-a"

[[annotators]]
id = "ann-b"
token_env = "FACTCHECK_TEST_TOKEN_B"
"#,
    )
    .unwrap();
    std::env::set_var("FACTCHECK_TEST_TOKEN_B", "secret-b");
    let loaded = factcheck_cli::ServeConfig::load(&cfg).unwrap();
    assert_eq!(loaded.data_dir, tmp.path().join("data"));
    assert_eq!(loaded.bind, "127.0.0.1:8080");
    let tokens = loaded.tokens().unwrap();
    assert_eq!(tokens["secret-a"], "ann-a");
    assert_eq!(tokens["secret-b"], "ann-b");
}
