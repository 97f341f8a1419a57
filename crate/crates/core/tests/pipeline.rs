mod common;

use std::collections::HashMap;
use std::sync::Arc;

use factcheck_core::evaluation::{
    run_benchmark, select_data, BenchmarkOptions, PipelineAdapter, SelectionCriteria, SubprocessAdapter, Subtask,
    SubtaskOutcome,
};
use factcheck_core::providers::{FixtureCorpus, MockCompletion, MockEmbedding, TranscriptEntry};
use factcheck_core::{Error, Pipeline, PipelineConfig, PipelineInput, ProviderSuite, Verdict};

#[test]
fn pipeline_adapter_agrees_with_its_own_gold() {
    let gold: Vec<_> = common::run_e2e().into_iter().map(|o| o.document).collect();
    let adapter = PipelineAdapter::new(Arc::new(common::e2e_pipeline()));
    let opts = BenchmarkOptions { embedder: Some(Arc::new(MockEmbedding::default())), ..Default::default() };
    let report = run_benchmark(&gold, &adapter, &opts).unwrap();
    for task in [Subtask::SentenceCheckworthiness, Subtask::ClaimCategory, Subtask::Stance, Subtask::Verification] {
        let r = report.classification(task).unwrap_or_else(|| panic!("{task:?} missing"));
        assert_eq!(r.accuracy, 1.0, "{task:?}");
    }
    let Some(SubtaskOutcome::Revision(rev)) = report.subtasks.get(&Subtask::Revision) else {
        panic!("revision subtask missing");
    };
    assert_eq!(rev.n, 2);
    assert!(rev.mean_edit_distance > 0.0 && rev.mean_edit_distance < 0.5);

    let text = report.to_text();
    for heading in ["== s1-sentence-cw ==", "== s4-verification ==", "== s5-revision =="] {
        assert!(text.contains(heading), "{text}");
    }
    assert!(text.contains("true-f1"));
}

#[test]
fn cached_rerun_gives_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig::load(common::e2e_dir().join("pipeline.toml")).unwrap();
    config.cache.enabled = true;
    config.cache.dir = tmp.path().to_path_buf();
    let inputs = common::e2e_inputs();
    let run = |config: &PipelineConfig| {
        let p = Pipeline::from_config(config.clone()).unwrap();
        let docs: Vec<_> = p.run_batch(&inputs).into_iter().map(|r| r.unwrap().document).collect();
        (docs, p.suite().stats.cache_hits())
    };
    let (cold, cold_hits) = run(&config);
    let (warm, warm_hits) = run(&config);
    assert_eq!(cold, warm);
    // Repeated passages hit the cache within one run too.
    assert!(warm_hits > cold_hits, "{cold_hits} then {warm_hits}");
    let (uncached, _) = run(&PipelineConfig { cache: Default::default(), ..config });
    assert_eq!(uncached, cold);
}

fn pronoun_suite() -> ProviderSuite {
    let completion = MockCompletion::new(vec![
        TranscriptEntry::for_template("decompose", "[\n  \"He was born in 1898.\"\n]"),
        TranscriptEntry::for_template("sentence_checkworthy", "yes"),
        TranscriptEntry::for_template("claim_category", "factual claim"),
        TranscriptEntry::for_template("importance", "most important"),
        TranscriptEntry::for_template("stance4", "irrelevant"),
    ]);
    let corpus = FixtureCorpus::new()
        .with_document("https://example.org/a", "Someone was born in 1898.")
        .with_default_urls(&["https://example.org/a"]);
    ProviderSuite::new(Arc::new(completion), Arc::new(MockEmbedding::default()), Arc::new(corpus))
}

#[test]
fn strict_mode_rejects_unresolved_pronouns() {
    let input = PipelineInput::new("p", "", "He was born in 1898.");
    let mut config = PipelineConfig::default();
    config.retrieval.queries = 1;

    let lenient = Pipeline::new(config.clone(), pronoun_suite());
    let out = lenient.run(&input).unwrap();
    assert_eq!(out.document.claims().next().unwrap().verdict, Verdict::NotEnoughEvidence);

    let strict = Pipeline::new(PipelineConfig { strict: true, ..config }, pronoun_suite());
    assert!(matches!(strict.run(&input), Err(Error::Strict(_))));
}

fn evasive_suite() -> ProviderSuite {
    let completion = MockCompletion::new(vec![
        TranscriptEntry::for_template("decompose", "[\n  \"Paris is in France.\"\n]"),
        TranscriptEntry::for_template("sentence_checkworthy", "yes"),
        TranscriptEntry::for_template("claim_category", "factual claim"),
        TranscriptEntry::for_template("importance", "intermediate"),
        TranscriptEntry::for_template("stance4", "I would rather not say."),
    ]);
    let corpus = FixtureCorpus::new()
        .with_document("https://example.org/p", "Paris is the capital of France.")
        .with_default_urls(&["https://example.org/p"]);
    ProviderSuite::new(Arc::new(completion), Arc::new(MockEmbedding::default()), Arc::new(corpus))
}

#[test]
fn unparseable_stance_degrades_unless_strict() {
    let input = PipelineInput::new("x", "", "Paris is in France.");
    let mut config = PipelineConfig::default();
    config.retrieval.queries = 1;
    let p = Pipeline::new(config.clone(), evasive_suite());
    let out = p.run(&input).unwrap();
    let claim = out.document.claims().next().unwrap();
    assert_eq!(claim.verdict, Verdict::NotEnoughEvidence);
    assert!(p.suite().stats.degraded_paths().iter().any(|d| d.contains("unparseable stance")));

    let strict = Pipeline::new(PipelineConfig { strict: true, ..config }, evasive_suite());
    assert!(matches!(strict.run(&input), Err(Error::Stance { .. })));
}

#[test]
fn selection_over_pipeline_output() {
    let docs: Vec<_> = common::run_e2e().into_iter().map(|o| o.document).collect();
    let gold = HashMap::from([("douglas".to_string(), docs[0].response.clone())]);
    let criteria = SelectionCriteria { min_chars: 50, ..Default::default() };
    let decisions = select_data(&docs, &gold, &MockEmbedding::default(), &criteria).unwrap();
    // douglas is identical to its gold answer, eiffel is all supported,
    // boiling has no completely supported claim.
    let kept: Vec<_> = decisions.iter().filter(|d| d.kept).map(|d| d.document_id.as_str()).collect();
    assert_eq!(kept, ["boiling"]);
}

const ECHO_ADAPTER: &str = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req["hook"] == "classify_sentence":
        out = {"result": len(req["sentence"]) > 25}
    elif req["hook"] == "verify":
        out = {"result": "true"}
    else:
        out = {"error": "hook-missing"}
    print(json.dumps(out), flush=True)
"#;

#[test]
fn subprocess_adapter_round_trip() {
    if std::process::Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available, skipping");
        return;
    }
    let gold: Vec<_> = common::run_e2e().into_iter().map(|o| o.document).collect();
    let adapter = SubprocessAdapter::spawn("python3", &["-c".into(), ECHO_ADAPTER.into()]).unwrap();
    let report = run_benchmark(&gold, &adapter, &BenchmarkOptions::default()).unwrap();
    assert!(report.classification(Subtask::SentenceCheckworthiness).is_some());
    let verification = report.classification(Subtask::Verification).unwrap();
    assert_eq!(verification.label("true").unwrap().recall, 1.0);
    for task in [Subtask::ClaimCategory, Subtask::Stance, Subtask::Revision] {
        assert!(matches!(report.subtasks.get(&task), Some(SubtaskOutcome::Skipped { .. })), "{task:?}");
    }
}
