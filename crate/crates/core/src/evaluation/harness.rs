//! Per-subtask benchmark runner over pluggable fact-checkers.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::classification::{eval_classification, ClassificationReport, LabelConvention};
use super::metrics::{embedding_cosine, normalized_edit_distance, word_overlap};
use crate::error::{Error, Result};
use crate::model::{AtomicClaim, ClaimCategory, FactcheckDocument, StanceLabelSpace, Verdict};
use crate::pipeline::Pipeline;
use crate::providers::EmbeddingProvider;
use crate::revision::revise_response_llm;
use crate::text::sha256_hex;
use crate::verification::StanceLabel;

/// A fact-checking system under evaluation. Every hook is optional; a
/// missing hook skips the subtasks that need it.
pub trait FactcheckerAdapter: Send + Sync {
    fn name(&self) -> String;

    fn classify_sentence(&self, _sentence: &str) -> Result<bool> {
        Err(Error::HookMissing("classify_sentence"))
    }

    fn classify_claim(&self, _claim: &str) -> Result<ClaimCategory> {
        Err(Error::HookMissing("classify_claim"))
    }

    fn stance(&self, _claim: &str, _evidence: &str, _space: StanceLabelSpace) -> Result<StanceLabel> {
        Err(Error::HookMissing("stance"))
    }

    /// Receives the claim with its evidence snippets; gold stances are
    /// cleared beforehand.
    fn verify(&self, _claim: &AtomicClaim) -> Result<Verdict> {
        Err(Error::HookMissing("verify"))
    }

    fn revise(&self, _doc: &FactcheckDocument) -> Result<String> {
        Err(Error::HookMissing("revise"))
    }
}

pub struct AlwaysCheckworthy;

impl FactcheckerAdapter for AlwaysCheckworthy {
    fn name(&self) -> String {
        "always-checkworthy".into()
    }

    fn classify_sentence(&self, _: &str) -> Result<bool> {
        Ok(true)
    }

    fn classify_claim(&self, _: &str) -> Result<ClaimCategory> {
        Ok(ClaimCategory::Factual)
    }
}

pub struct AlwaysTrue;

impl FactcheckerAdapter for AlwaysTrue {
    fn name(&self) -> String {
        "always-true".into()
    }

    fn verify(&self, _: &AtomicClaim) -> Result<Verdict> {
        Ok(Verdict::True)
    }
}

pub struct AlwaysFalse;

impl FactcheckerAdapter for AlwaysFalse {
    fn name(&self) -> String {
        "always-false".into()
    }

    fn verify(&self, _: &AtomicClaim) -> Result<Verdict> {
        Ok(Verdict::False)
    }
}

/// Uniform random labels. Each answer is a pure function of the seed and
/// the input, so results do not depend on call order.
pub struct RandomAdapter {
    pub seed: u64,
}

impl RandomAdapter {
    fn pick(&self, hook: &str, input: &str, n: usize) -> usize {
        let digest = sha256_hex(format!("{}\0{hook}\0{input}", self.seed));
        (u64::from_str_radix(&digest[..16], 16).expect("hex digest") % n as u64) as usize
    }
}

impl FactcheckerAdapter for RandomAdapter {
    fn name(&self) -> String {
        format!("random-{}", self.seed)
    }

    fn classify_sentence(&self, sentence: &str) -> Result<bool> {
        Ok(self.pick("sentence", sentence, 2) == 0)
    }

    fn classify_claim(&self, claim: &str) -> Result<ClaimCategory> {
        Ok(ClaimCategory::ALL[self.pick("claim", claim, ClaimCategory::ALL.len())])
    }

    fn stance(&self, claim: &str, evidence: &str, space: StanceLabelSpace) -> Result<StanceLabel> {
        let labels = StanceLabel::labels(space);
        Ok(labels[self.pick("stance", &format!("{claim}\0{evidence}"), labels.len())])
    }

    fn verify(&self, claim: &AtomicClaim) -> Result<Verdict> {
        Ok(if self.pick("verify", &claim.text, 2) == 0 { Verdict::True } else { Verdict::False })
    }
}

/// The built-in pipeline as a benchmark participant.
pub struct PipelineAdapter {
    pipeline: Arc<Pipeline>,
}

impl PipelineAdapter {
    pub fn new(pipeline: Arc<Pipeline>) -> Self {
        Self { pipeline }
    }
}

impl FactcheckerAdapter for PipelineAdapter {
    fn name(&self) -> String {
        format!("pipeline:{}", self.pipeline.suite().completion.id())
    }

    fn classify_sentence(&self, sentence: &str) -> Result<bool> {
        self.pipeline.check_sentence(sentence)
    }

    fn classify_claim(&self, claim: &str) -> Result<ClaimCategory> {
        self.pipeline.categorize_claim(claim)
    }

    fn stance(&self, claim: &str, evidence: &str, space: StanceLabelSpace) -> Result<StanceLabel> {
        self.pipeline.stance(claim, evidence, space)
    }

    fn verify(&self, claim: &AtomicClaim) -> Result<Verdict> {
        let mut claim = claim.clone();
        Ok(self.pipeline.verify(&mut claim)?.verdict)
    }

    fn revise(&self, doc: &FactcheckDocument) -> Result<String> {
        revise_response_llm(doc, self.pipeline.suite().completion.as_ref())
    }
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// An external process speaking line-delimited JSON: one request object
/// `{"hook": ..., ...}` per line in, one `{"result": ...}` or
/// `{"error": ...}` per line out. `{"error": "hook-missing"}` marks an
/// unimplemented hook.
pub struct SubprocessAdapter {
    name: String,
    io: Mutex<ChildIo>,
}

impl SubprocessAdapter {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let name = std::iter::once(program.to_string()).chain(args.iter().cloned()).collect::<Vec<_>>().join(" ");
        Ok(Self { name, io: Mutex::new(ChildIo { child, stdin, stdout }) })
    }

    fn call(&self, hook: &'static str, mut request: Value) -> Result<Value> {
        request["hook"] = json!(hook);
        let mut io = self.io.lock();
        writeln!(io.stdin, "{request}")?;
        io.stdin.flush()?;
        let mut line = String::new();
        if io.stdout.read_line(&mut line)? == 0 {
            return Err(Error::InvalidInput(format!("adapter process exited during `{hook}`")));
        }
        let reply: Value = serde_json::from_str(&line)?;
        match (reply.get("result"), reply.get("error")) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(Value::String(e))) if e == "hook-missing" => Err(Error::HookMissing(hook)),
            (None, Some(e)) => Err(Error::InvalidInput(format!("adapter `{hook}` failed: {e}"))),
            (None, None) => Err(Error::InvalidInput(format!("adapter `{hook}` reply lacks result: {line}"))),
        }
    }

    fn typed<T: serde::de::DeserializeOwned>(&self, hook: &'static str, request: Value) -> Result<T> {
        Ok(serde_json::from_value(self.call(hook, request)?)?)
    }
}

impl Drop for SubprocessAdapter {
    fn drop(&mut self) {
        let io = self.io.get_mut();
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}

impl FactcheckerAdapter for SubprocessAdapter {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn classify_sentence(&self, sentence: &str) -> Result<bool> {
        self.typed("classify_sentence", json!({ "sentence": sentence }))
    }

    fn classify_claim(&self, claim: &str) -> Result<ClaimCategory> {
        self.typed("classify_claim", json!({ "claim": claim }))
    }

    fn stance(&self, claim: &str, evidence: &str, space: StanceLabelSpace) -> Result<StanceLabel> {
        self.typed("stance", json!({ "claim": claim, "evidence": evidence, "label_space": space }))
    }

    fn verify(&self, claim: &AtomicClaim) -> Result<Verdict> {
        self.typed("verify", json!({ "claim": claim }))
    }

    fn revise(&self, doc: &FactcheckDocument) -> Result<String> {
        self.typed("revise", json!({ "document": doc }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtask {
    #[serde(rename = "s1-sentence-cw")]
    SentenceCheckworthiness,
    #[serde(rename = "s2-claim-cw")]
    ClaimCategory,
    #[serde(rename = "s3-stance")]
    Stance,
    #[serde(rename = "s4-verification")]
    Verification,
    #[serde(rename = "s5-revision")]
    Revision,
}

impl Subtask {
    pub const ALL: [Subtask; 5] =
        [Self::SentenceCheckworthiness, Self::ClaimCategory, Self::Stance, Self::Verification, Self::Revision];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SentenceCheckworthiness => "s1-sentence-cw",
            Self::ClaimCategory => "s2-claim-cw",
            Self::Stance => "s3-stance",
            Self::Verification => "s4-verification",
            Self::Revision => "s5-revision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s || t.as_str()[..2] == *s)
    }
}

pub const CHECKWORTHY: &str = "checkworthy";
pub const NOT_CHECKWORTHY: &str = "non-checkworthy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevisionReport {
    pub n: usize,
    /// Against the original response; lower preserves more.
    pub mean_edit_distance: f64,
    pub mean_word_overlap: f64,
    /// Against the human revision; present when an embedder is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cosine_to_human: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubtaskOutcome {
    Classification(ClassificationReport),
    Revision(RevisionReport),
    Skipped { missing_hook: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub adapter: String,
    pub documents: usize,
    pub label_space: StanceLabelSpace,
    pub convention: LabelConvention,
    pub subtasks: BTreeMap<Subtask, SubtaskOutcome>,
}

impl EvalReport {
    pub fn classification(&self, task: Subtask) -> Option<&ClassificationReport> {
        match self.subtasks.get(&task) {
            Some(SubtaskOutcome::Classification(r)) => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Default)]
pub struct BenchmarkOptions {
    /// Empty runs every subtask.
    pub subtasks: Vec<Subtask>,
    pub label_space: StanceLabelSpace,
    pub convention: LabelConvention,
    pub embedder: Option<Arc<dyn EmbeddingProvider>>,
}

fn skip_missing<T>(r: Result<T>) -> Result<std::result::Result<T, &'static str>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(Error::HookMissing(h)) => Ok(Err(h)),
        Err(e) => Err(e),
    }
}

fn classify<G: AsRef<str>>(
    gold: Vec<G>,
    predict: impl Fn(usize) -> Result<String>,
    space: &[&str],
    convention: LabelConvention,
) -> Result<SubtaskOutcome> {
    let mut pred = Vec::with_capacity(gold.len());
    for i in 0..gold.len() {
        match skip_missing(predict(i))? {
            Ok(p) => pred.push(p),
            Err(hook) => return Ok(SubtaskOutcome::Skipped { missing_hook: hook.to_string() }),
        }
    }
    Ok(SubtaskOutcome::Classification(eval_classification(&gold, &pred, space, convention)?))
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::True => "true",
        Verdict::False => "false",
        Verdict::NotEnoughEvidence => "not-enough-evidence",
        Verdict::Unassessed => "unassessed",
    }
}

/// Runs the requested subtasks against gold documents.
pub fn run_benchmark(
    docs: &[FactcheckDocument],
    adapter: &dyn FactcheckerAdapter,
    opts: &BenchmarkOptions,
) -> Result<EvalReport> {
    let tasks = if opts.subtasks.is_empty() { Subtask::ALL.to_vec() } else { opts.subtasks.clone() };
    let mut subtasks = BTreeMap::new();
    for task in tasks {
        let outcome = match task {
            Subtask::SentenceCheckworthiness => {
                let sentences: Vec<_> = docs.iter().flat_map(|d| &d.sentences).collect();
                let gold: Vec<&str> =
                    sentences.iter().map(|s| if s.checkworthy { CHECKWORTHY } else { NOT_CHECKWORTHY }).collect();
                classify(
                    gold,
                    |i| {
                        adapter
                            .classify_sentence(&sentences[i].text)
                            .map(|b| if b { CHECKWORTHY } else { NOT_CHECKWORTHY }.to_string())
                    },
                    &[CHECKWORTHY, NOT_CHECKWORTHY],
                    opts.convention,
                )?
            }
            Subtask::ClaimCategory => {
                let claims: Vec<_> = docs.iter().flat_map(|d| d.claims()).collect();
                let gold: Vec<&str> = claims.iter().map(|c| c.category.as_str()).collect();
                let space: Vec<&str> = ClaimCategory::ALL.iter().map(|c| c.as_str()).collect();
                classify(
                    gold,
                    |i| adapter.classify_claim(&claims[i].text).map(|c| c.as_str().to_string()),
                    &space,
                    opts.convention,
                )?
            }
            Subtask::Stance => {
                let space = opts.label_space;
                let pairs: Vec<(&str, &str, StanceLabel)> = docs
                    .iter()
                    .flat_map(|d| d.claims())
                    .flat_map(|c| {
                        c.evidence.iter().filter_map(move |e| {
                            StanceLabel::from_stance(e.stance).map(|l| (c.text.as_str(), e.snippet.as_str(), l.in_space(space)))
                        })
                    })
                    .collect();
                let labels: Vec<&str> = StanceLabel::labels(space).iter().map(|l| l.as_str()).collect();
                classify(
                    pairs.iter().map(|p| p.2.as_str()).collect(),
                    |i| adapter.stance(pairs[i].0, pairs[i].1, space).map(|l| l.in_space(space).as_str().to_string()),
                    &labels,
                    opts.convention,
                )?
            }
            Subtask::Verification => {
                let claims: Vec<AtomicClaim> = docs
                    .iter()
                    .flat_map(|d| d.checkworthy_claims())
                    .filter(|c| matches!(c.verdict, Verdict::True | Verdict::False))
                    .map(|c| {
                        let mut c = c.clone();
                        c.evidence.iter_mut().for_each(|e| e.stance = Default::default());
                        c
                    })
                    .collect();
                let gold: Vec<&str> = docs
                    .iter()
                    .flat_map(|d| d.checkworthy_claims())
                    .filter(|c| matches!(c.verdict, Verdict::True | Verdict::False))
                    .map(|c| verdict_label(c.verdict))
                    .collect();
                classify(
                    gold,
                    |i| adapter.verify(&claims[i]).map(|v| verdict_label(v).to_string()),
                    &["true", "false", "not-enough-evidence", "unassessed"],
                    opts.convention,
                )?
            }
            Subtask::Revision => revision_subtask(docs, adapter, opts)?,
        };
        subtasks.insert(task, outcome);
    }
    Ok(EvalReport {
        adapter: adapter.name(),
        documents: docs.len(),
        label_space: opts.label_space,
        convention: opts.convention,
        subtasks,
    })
}

fn revision_subtask(
    docs: &[FactcheckDocument],
    adapter: &dyn FactcheckerAdapter,
    opts: &BenchmarkOptions,
) -> Result<SubtaskOutcome> {
    let targets: Vec<&FactcheckDocument> = docs.iter().filter(|d| d.revised_response.is_some()).collect();
    let (mut ed, mut wo, mut cos) = (0.0, 0.0, 0.0);
    for doc in &targets {
        let revised = match skip_missing(adapter.revise(doc))? {
            Ok(r) => r,
            Err(hook) => return Ok(SubtaskOutcome::Skipped { missing_hook: hook.to_string() }),
        };
        ed += normalized_edit_distance(&doc.response, &revised);
        wo += word_overlap(&doc.response, &revised);
        if let Some(embedder) = &opts.embedder {
            let human = doc.revised_response.as_deref().unwrap_or_default();
            cos += embedding_cosine(&revised, human, embedder.as_ref())?;
        }
    }
    let n = targets.len();
    let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
    Ok(SubtaskOutcome::Revision(RevisionReport {
        n,
        mean_edit_distance: mean(ed),
        mean_word_overlap: mean(wo),
        mean_cosine_to_human: opts.embedder.as_ref().map(|_| mean(cos)),
    }))
}
