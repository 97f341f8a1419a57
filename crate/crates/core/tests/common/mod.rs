#![allow(dead_code)]

use std::path::PathBuf;

use factcheck_core::model::{Stance, Verdict};
use factcheck_core::pipeline::PipelineOutput;
use factcheck_core::{
    AtomicClaim, EvidenceItem, FactcheckDocument, Pipeline, PipelineConfig, PipelineInput, SentenceUnit,
};

pub fn e2e_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

pub fn e2e_inputs() -> Vec<PipelineInput> {
    std::fs::read_to_string(e2e_dir().join("inputs.jsonl"))
        .expect("fixture inputs")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("input line"))
        .collect()
}

pub fn e2e_pipeline() -> Pipeline {
    let config = PipelineConfig::load(e2e_dir().join("pipeline.toml")).expect("fixture config");
    Pipeline::from_config(config).expect("mock providers")
}

pub fn run_e2e() -> Vec<PipelineOutput> {
    let pipeline = e2e_pipeline();
    pipeline.run_batch(&e2e_inputs()).into_iter().map(|r| r.expect("fixture run")).collect()
}

/// The three pipeline outputs as annotation base documents: claim and
/// evidence structure kept, revision fields cleared so step 3 re-derives
/// them.
pub fn annotation_fixture() -> Vec<FactcheckDocument> {
    run_e2e()
        .into_iter()
        .map(|o| {
            let mut d = o.document;
            d.revised_response = None;
            d.document_verdict = None;
            d
        })
        .collect()
}

/// One sentence, one claim per (verdict, stance) pair.
pub fn scripted_doc(id: &str, response: &str, claims: &[(Verdict, Stance)]) -> FactcheckDocument {
    let mut d = FactcheckDocument::new(id, "q", response);
    let mut s = SentenceUnit::new(format!("{id}-s1"), response);
    for (i, (verdict, stance)) in claims.iter().enumerate() {
        let mut c = AtomicClaim::new(format!("{id}-c{i}"), format!("claim {i} of {id}"));
        c.verdict = *verdict;
        let mut e = EvidenceItem::new("q", format!("https://example.org/{id}/{i}"), "snippet");
        e.stance = *stance;
        c.evidence.push(e);
        s.claims.push(c);
    }
    if claims.is_empty() {
        s.checkworthy = false;
        s.category = factcheck_core::ClaimCategory::Opinion;
    }
    d.sentences.push(s);
    d
}
