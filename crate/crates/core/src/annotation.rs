//! Three-step, two-annotator annotation workflow.
//!
//! Each document goes through decomposition/checkworthiness, stance and
//! correction, and merge/revision. For every step two annotators work on
//! independent drafts seeded with the same automatic pre-fill, submit, and
//! then consolidate the field-level differences into one record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result, ValidationError};
use crate::model::{
    validate_dataset, DatasetOptions, EvidenceItem, FactcheckDocument, Reliability, Source, Stance, Verdict,
    DEFAULT_EVIDENCE_K, MANUAL_URL_PREFIX,
};
use crate::pipeline::{Pipeline, PipelineInput};
use crate::revision::merge_response;
use crate::store::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    #[serde(rename = "step1-decompose-cw")]
    DecomposeCheckworthy,
    #[serde(rename = "step2-stance-correct")]
    StanceCorrect,
    #[serde(rename = "step3-merge-revise")]
    MergeRevise,
}

impl Step {
    pub const ALL: [Step; 3] = [Self::DecomposeCheckworthy, Self::StanceCorrect, Self::MergeRevise];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DecomposeCheckworthy => "step1-decompose-cw",
            Self::StanceCorrect => "step2-stance-correct",
            Self::MergeRevise => "step3-merge-revise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s || t.as_str()[..5] == *s)
    }

    pub fn next(self) -> Option<Self> {
        match self {
            Self::DecomposeCheckworthy => Some(Self::StanceCorrect),
            Self::StanceCorrect => Some(Self::MergeRevise),
            Self::MergeRevise => None,
        }
    }
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    InProgress,
    Submitted,
    Consolidated,
    Discarded,
}

impl SessionStatus {
    pub fn is_active(self) -> bool {
        matches!(self, Self::InProgress | Self::Submitted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub session_id: String,
    pub document_id: String,
    pub annotator_id: String,
    pub step: Step,
    pub draft: FactcheckDocument,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub field_path: String,
    pub value_a: Value,
    pub value_b: Value,
    #[serde(default)]
    pub resolved_value: Option<Value>,
    #[serde(default)]
    pub resolver: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Consensus,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationRecord {
    pub document_id: String,
    pub step: Step,
    pub annotator_a: String,
    pub annotator_b: String,
    pub disagreements: Vec<Disagreement>,
    #[serde(default)]
    pub third_rater: Option<String>,
    pub outcome: Outcome,
}

/// Resolved values keyed by field path, as listed by the disagreement diff.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsolidationRequest {
    pub step: Option<Step>,
    pub resolver: String,
    pub resolutions: BTreeMap<String, Value>,
    /// Escalation: remaining unresolved disagreements discard the document
    /// instead of failing.
    pub third_rater: Option<String>,
    /// Give up on the document.
    pub discard: bool,
}

/// Annotator-supplied evidence. Without a URL a `manual:` placeholder is
/// generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualEvidence {
    #[serde(default)]
    pub url: Option<String>,
    pub snippet: String,
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub reliability: Reliability,
    #[serde(default)]
    pub stance: Stance,
    #[serde(default)]
    pub sufficient_alone: bool,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown claim {0}")]
    UnknownClaim(String),
    #[error("document {0} already exists")]
    DuplicateDocument(String),
    #[error("document {document} already has two annotators for {step}")]
    TooManyAnnotators { document: String, step: Step },
    #[error("annotator {annotator} already has a session for {document} {step}")]
    DuplicateAnnotator { annotator: String, document: String, step: Step },
    #[error("step order violation on {document}: {requested} requested, current step is {current}")]
    StepOrder { document: String, requested: Step, current: String },
    #[error("session {session} is {status:?}; only in-progress drafts can change")]
    NotEditable { session: String, status: SessionStatus },
    #[error("session {0} belongs to another annotator")]
    Forbidden(String),
    #[error("{0}")]
    NotReady(String),
    #[error("document {0} was discarded")]
    Discarded(String),
    #[error("missing resolutions for {} field(s)", .0.len())]
    MissingResolution(Vec<String>),
    #[error("invalid resolution for {path}: {message}")]
    InvalidResolution { path: String, message: String },
    #[error("fields fixed by an earlier step were changed")]
    FrozenFields(Vec<String>),
    #[error("manual evidence is only accepted in {} sessions", Step::StanceCorrect)]
    WrongStep,
}

impl WorkflowError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownDocument(_) => "unknown-document",
            Self::UnknownSession(_) => "unknown-session",
            Self::UnknownClaim(_) => "unknown-claim",
            Self::DuplicateDocument(_) => "duplicate-document",
            Self::TooManyAnnotators { .. } => "too-many-annotators",
            Self::DuplicateAnnotator { .. } => "duplicate-annotator",
            Self::StepOrder { .. } => "step-order",
            Self::NotEditable { .. } => "not-editable",
            Self::Forbidden(_) => "forbidden",
            Self::NotReady(_) => "not-ready",
            Self::Discarded(_) => "discarded",
            Self::MissingResolution(_) => "missing-resolution",
            Self::InvalidResolution { .. } => "invalid-resolution",
            Self::FrozenFields(_) => "frozen-fields",
            Self::WrongStep => "wrong-step",
        }
    }

    pub fn field_paths(&self) -> Vec<String> {
        match self {
            Self::MissingResolution(p) | Self::FrozenFields(p) => p.clone(),
            Self::InvalidResolution { path, .. } => vec![path.clone()],
            _ => Vec::new(),
        }
    }
}

/// Automatic pre-fill for a step, computed from the consolidated output of
/// the previous step (or the raw document for step 1).
pub trait Prefiller: Send + Sync {
    fn prefill(&self, step: Step, base: &FactcheckDocument) -> Result<FactcheckDocument>;
}

/// Seeds drafts with the base document unchanged.
pub struct NoPrefill;

impl Prefiller for NoPrefill {
    fn prefill(&self, _step: Step, base: &FactcheckDocument) -> Result<FactcheckDocument> {
        Ok(base.clone())
    }
}

/// Step 1: automatic decomposition and classification. Step 2: retrieved
/// evidence for checkworthy claims. Step 3: merged revision.
pub struct PipelinePrefiller {
    pipeline: Arc<Pipeline>,
}

impl PipelinePrefiller {
    pub fn new(pipeline: Arc<Pipeline>) -> Self {
        Self { pipeline }
    }
}

impl Prefiller for PipelinePrefiller {
    fn prefill(&self, step: Step, base: &FactcheckDocument) -> Result<FactcheckDocument> {
        let mut doc = base.clone();
        match step {
            Step::DecomposeCheckworthy => {
                if doc.sentences.is_empty() {
                    let input = PipelineInput {
                        id: doc.id.clone(),
                        question: doc.question.clone(),
                        response: doc.response.clone(),
                        source: doc.source,
                    };
                    doc.sentences = self.pipeline.decompose_and_classify(&input)?;
                }
            }
            Step::StanceCorrect => {
                for claim in doc.claims_mut().filter(|c| c.is_checkworthy() && c.evidence.is_empty()) {
                    self.pipeline.retrieve_evidence(claim)?;
                }
            }
            Step::MergeRevise => merge_prefill(&mut doc),
        }
        Ok(doc)
    }
}

fn merge_prefill(doc: &mut FactcheckDocument) {
    if doc.has_changes() && doc.revised_response.is_none() {
        doc.revised_response = Some(merge_response(doc));
    }
    doc.document_verdict = Some(doc.derive_verdict());
}

/// Step 3 pre-fill without a pipeline.
pub struct MergePrefiller;

impl Prefiller for MergePrefiller {
    fn prefill(&self, step: Step, base: &FactcheckDocument) -> Result<FactcheckDocument> {
        let mut doc = base.clone();
        if step == Step::MergeRevise {
            merge_prefill(&mut doc);
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentState {
    pub original: FactcheckDocument,
    /// Output of the latest consolidated step.
    pub current: FactcheckDocument,
    /// Next step to annotate; `None` once step 3 is consolidated.
    pub step: Option<Step>,
    pub discarded: bool,
    #[serde(default)]
    pub prefill: BTreeMap<Step, FactcheckDocument>,
    #[serde(default)]
    pub consolidations: Vec<ConsolidationRecord>,
}

impl DocumentState {
    pub fn is_complete(&self) -> bool {
        self.step.is_none() && !self.discarded
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreState {
    pub documents: BTreeMap<String, DocumentState>,
    pub sessions: BTreeMap<String, AnnotationSession>,
    pub next_session: u64,
}

/// Claims by whether annotators needed manual evidence to reach a verdict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceBreakdown {
    pub auto_only: usize,
    pub needed_manual: usize,
}

/// Checkworthy claims with a true/false verdict, split by whether any
/// manual evidence was attached.
pub fn evidence_breakdown(docs: &[FactcheckDocument]) -> EvidenceBreakdown {
    let mut out = EvidenceBreakdown::default();
    for claim in docs
        .iter()
        .flat_map(|d| d.checkworthy_claims())
        .filter(|c| matches!(c.verdict, Verdict::True | Verdict::False))
    {
        if claim.evidence.iter().any(EvidenceItem::is_manual) {
            out.needed_manual += 1;
        } else {
            out.auto_only += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportFilter {
    pub source: Option<Source>,
}

/// Workflow state plus its JSON file. Callers serialize access (one writer).
pub struct AnnotationStore {
    state: StoreState,
    path: Option<PathBuf>,
    prefiller: Arc<dyn Prefiller>,
    k: usize,
}

fn path_segments(path: &str) -> Vec<PathSeg> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, rest) = part.split_once('[').map_or((part, ""), |(k, r)| (k, r));
        if !key.is_empty() {
            out.push(PathSeg::Key(key.to_string()));
        }
        for idx in rest.split('[') {
            if let Ok(i) = idx.trim_end_matches(']').parse() {
                out.push(PathSeg::Index(i));
            }
        }
    }
    out
}

enum PathSeg {
    Key(String),
    Index(usize),
}

/// Field-path diff: objects recurse per key, arrays of equal length recurse
/// per element, anything else is compared as a whole. A missing key
/// compares as `null`.
pub fn diff_values(a: &Value, b: &Value) -> Vec<Disagreement> {
    let mut out = Vec::new();
    diff_into(a, b, String::new(), &mut out);
    out
}

fn diff_into(a: &Value, b: &Value, path: String, out: &mut Vec<Disagreement>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                diff_into(x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null), child, out);
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                diff_into(p, q, format!("{path}[{i}]"), out);
            }
        }
        _ if a != b => out.push(Disagreement {
            field_path: path,
            value_a: a.clone(),
            value_b: b.clone(),
            resolved_value: None,
            resolver: None,
        }),
        _ => {}
    }
}

/// Sets the value at a field path; `null` on an object key removes it.
fn set_path(root: &mut Value, path: &str, value: Value) -> std::result::Result<(), String> {
    let segs = path_segments(path);
    let Some((last, parents)) = segs.split_last() else {
        *root = value;
        return Ok(());
    };
    let mut cur = root;
    for seg in parents {
        cur = match seg {
            PathSeg::Key(k) => cur.get_mut(k.as_str()).ok_or_else(|| format!("no field {k}"))?,
            PathSeg::Index(i) => cur.get_mut(*i).ok_or_else(|| format!("no index {i}"))?,
        };
    }
    match (last, cur) {
        (PathSeg::Key(k), Value::Object(map)) => {
            if value.is_null() {
                map.remove(k);
            } else {
                map.insert(k.clone(), value);
            }
            Ok(())
        }
        (PathSeg::Index(i), Value::Array(items)) if *i < items.len() => {
            items[*i] = value;
            Ok(())
        }
        _ => Err("path does not address a field".into()),
    }
}

/// Parts of a draft that earlier consolidated steps fixed.
fn frozen_view(doc: &FactcheckDocument, step: Step) -> Value {
    let mut v = serde_json::json!({
        "id": doc.id,
        "question": doc.question,
        "response": doc.response,
        "source": doc.source,
    });
    if step >= Step::StanceCorrect {
        v["sentences"] = doc
            .sentences
            .iter()
            .map(|s| {
                serde_json::json!({
                    "id": s.id,
                    "text": s.text,
                    "checkworthy": s.checkworthy,
                    "category": s.category,
                    "importance": s.importance,
                    "claims": s.claims.iter().map(|c| {
                        let mut cv = serde_json::json!({
                            "id": c.id, "text": c.text, "category": c.category, "importance": c.importance,
                        });
                        if step >= Step::MergeRevise {
                            cv["evidence"] = serde_json::to_value(&c.evidence).expect("serializable");
                            cv["verdict"] = serde_json::to_value(c.verdict).expect("serializable");
                            cv["edits"] = serde_json::to_value(&c.edits).expect("serializable");
                            cv["revised_text"] = serde_json::to_value(&c.revised_text).expect("serializable");
                        }
                        cv
                    }).collect::<Vec<_>>(),
                })
            })
            .collect();
    }
    v
}

/// Validation of an intermediate draft: document-level revision fields are
/// only required from step 3 on.
fn check_draft(doc: &FactcheckDocument, step: Step, k: usize) -> Result<()> {
    match doc.validate_with_k(k) {
        Ok(()) => Ok(()),
        Err(e) if step == Step::MergeRevise => Err(e.into()),
        Err(e) => {
            let kept = ValidationError {
                violations: e
                    .violations
                    .into_iter()
                    .filter(|(p, _)| p != "revised_response" && p != "document_verdict")
                    .collect(),
            };
            kept.into_result().map_err(Error::from)
        }
    }
}

fn wf(e: WorkflowError) -> Error {
    Error::Workflow(e)
}

impl AnnotationStore {
    pub fn in_memory(prefiller: Arc<dyn Prefiller>) -> Self {
        Self { state: StoreState::default(), path: None, prefiller, k: DEFAULT_EVIDENCE_K }
    }

    /// Opens (or creates) `dir/state.json`.
    pub fn open(dir: impl AsRef<Path>, prefiller: Arc<dyn Prefiller>) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let path = dir.join("state.json");
        let state = if path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&path)?)?
        } else {
            StoreState::default()
        };
        Ok(Self { state, path: Some(path), prefiller, k: DEFAULT_EVIDENCE_K })
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    fn save(&self) -> Result<()> {
        if let Some(path) = &self.path {
            write_atomic(path, serde_json::to_string(&self.state)?.as_bytes())?;
        }
        Ok(())
    }

    /// Runs a mutation and persists it; on error the state is rolled back.
    fn mutate<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let snapshot = self.state.clone();
        match f(self).and_then(|v| self.save().map(|_| v)) {
            Ok(v) => Ok(v),
            Err(e) => {
                self.state = snapshot;
                Err(e)
            }
        }
    }

    pub fn add_document(&mut self, doc: FactcheckDocument) -> Result<()> {
        self.mutate(|s| {
            if s.state.documents.contains_key(&doc.id) {
                return Err(wf(WorkflowError::DuplicateDocument(doc.id.clone())));
            }
            let state = DocumentState {
                original: doc.clone(),
                current: doc.clone(),
                step: Some(Step::DecomposeCheckworthy),
                discarded: false,
                prefill: BTreeMap::new(),
                consolidations: Vec::new(),
            };
            s.state.documents.insert(doc.id, state);
            Ok(())
        })
    }

    pub fn document(&self, id: &str) -> Result<&DocumentState> {
        self.state.documents.get(id).ok_or_else(|| wf(WorkflowError::UnknownDocument(id.to_string())))
    }

    fn active_sessions(&self, document: &str, step: Step) -> Vec<&AnnotationSession> {
        self.state
            .sessions
            .values()
            .filter(|s| s.document_id == document && s.step == step && s.status.is_active())
            .collect()
    }

    /// Opens a session on the document's current step.
    pub fn create_session(&mut self, document_id: &str, annotator_id: &str) -> Result<AnnotationSession> {
        self.mutate(|s| {
            let doc = s.document(document_id)?;
            if doc.discarded {
                return Err(wf(WorkflowError::Discarded(document_id.to_string())));
            }
            let Some(step) = doc.step else {
                return Err(wf(WorkflowError::StepOrder {
                    document: document_id.to_string(),
                    requested: Step::MergeRevise,
                    current: "complete".into(),
                }));
            };
            let active = s.active_sessions(document_id, step);
            if active.iter().any(|a| a.annotator_id == annotator_id) {
                return Err(wf(WorkflowError::DuplicateAnnotator {
                    annotator: annotator_id.to_string(),
                    document: document_id.to_string(),
                    step,
                }));
            }
            if active.len() >= 2 {
                return Err(wf(WorkflowError::TooManyAnnotators { document: document_id.to_string(), step }));
            }
            let draft = match doc.prefill.get(&step) {
                Some(p) => p.clone(),
                None => {
                    let p = s.prefiller.prefill(step, &doc.current)?;
                    s.state.documents.get_mut(document_id).expect("checked").prefill.insert(step, p.clone());
                    p
                }
            };
            s.state.next_session += 1;
            let session = AnnotationSession {
                session_id: format!("sess-{}", s.state.next_session),
                document_id: document_id.to_string(),
                annotator_id: annotator_id.to_string(),
                step,
                draft,
                status: SessionStatus::InProgress,
            };
            s.state.sessions.insert(session.session_id.clone(), session.clone());
            Ok(session)
        })
    }

    /// A session is readable only by its annotator.
    pub fn session(&self, session_id: &str, requester: &str) -> Result<&AnnotationSession> {
        let s = self
            .state
            .sessions
            .get(session_id)
            .ok_or_else(|| wf(WorkflowError::UnknownSession(session_id.to_string())))?;
        if s.annotator_id != requester {
            return Err(wf(WorkflowError::Forbidden(session_id.to_string())));
        }
        Ok(s)
    }

    fn editable(&self, session_id: &str, requester: &str) -> Result<&AnnotationSession> {
        let s = self.session(session_id, requester)?;
        if s.status != SessionStatus::InProgress {
            return Err(wf(WorkflowError::NotEditable { session: session_id.to_string(), status: s.status }));
        }
        Ok(s)
    }

    fn check_frozen(&self, session: &AnnotationSession, draft: &FactcheckDocument) -> Result<()> {
        let base = &self.document(&session.document_id)?.current;
        let changed: Vec<String> = diff_values(&frozen_view(base, session.step), &frozen_view(draft, session.step))
            .into_iter()
            .map(|d| d.field_path)
            .collect();
        if changed.is_empty() {
            Ok(())
        } else {
            Err(wf(WorkflowError::FrozenFields(changed)))
        }
    }

    /// Replaces the draft of an in-progress session.
    pub fn update_draft(
        &mut self,
        session_id: &str,
        requester: &str,
        draft: FactcheckDocument,
    ) -> Result<AnnotationSession> {
        self.mutate(|s| {
            let session = s.editable(session_id, requester)?.clone();
            s.check_frozen(&session, &draft)?;
            let entry = s.state.sessions.get_mut(session_id).expect("checked");
            entry.draft = draft;
            Ok(entry.clone())
        })
    }

    /// Submits the draft (optionally replacing it first). The draft must
    /// validate; revision fields are only checked in step 3.
    pub fn submit(
        &mut self,
        session_id: &str,
        requester: &str,
        draft: Option<FactcheckDocument>,
    ) -> Result<AnnotationSession> {
        self.mutate(|s| {
            let session = s.editable(session_id, requester)?.clone();
            let draft = draft.unwrap_or(session.draft.clone());
            s.check_frozen(&session, &draft)?;
            check_draft(&draft, session.step, s.k)?;
            let entry = s.state.sessions.get_mut(session_id).expect("checked");
            entry.draft = draft;
            entry.status = SessionStatus::Submitted;
            Ok(entry.clone())
        })
    }

    fn submitted_pair(&self, document_id: &str, step: Step) -> Result<(&AnnotationSession, &AnnotationSession)> {
        let active = self.active_sessions(document_id, step);
        let submitted: Vec<&AnnotationSession> =
            active.iter().copied().filter(|s| s.status == SessionStatus::Submitted).collect();
        match submitted.as_slice() {
            [a, b] => {
                // Stable order: earlier session is annotator A.
                let (a, b) = if session_no(a) <= session_no(b) { (a, b) } else { (b, a) };
                Ok((*a, *b))
            }
            _ => Err(wf(WorkflowError::NotReady(format!(
                "{document_id} {step}: {} of 2 annotators submitted",
                submitted.len()
            )))),
        }
    }

    /// Differences between the two submitted drafts. Hidden until both
    /// annotators have submitted; consolidated steps return their log.
    pub fn disagreements(&self, document_id: &str, step: Step) -> Result<Vec<Disagreement>> {
        let doc = self.document(document_id)?;
        if let Some(rec) = doc.consolidations.iter().find(|r| r.step == step) {
            return Ok(rec.disagreements.clone());
        }
        let (a, b) = self.submitted_pair(document_id, step)?;
        Ok(diff_values(&serde_json::to_value(&a.draft)?, &serde_json::to_value(&b.draft)?))
    }

    /// Merges the two submitted drafts of the current step.
    pub fn consolidate(&mut self, document_id: &str, req: ConsolidationRequest) -> Result<ConsolidationRecord> {
        self.mutate(|s| {
            let doc = s.document(document_id)?;
            if doc.discarded {
                return Err(wf(WorkflowError::Discarded(document_id.to_string())));
            }
            let current = doc.step;
            let step = req.step.or(current).ok_or_else(|| {
                wf(WorkflowError::StepOrder {
                    document: document_id.to_string(),
                    requested: Step::MergeRevise,
                    current: "complete".into(),
                })
            })?;
            if Some(step) != current {
                return Err(wf(WorkflowError::StepOrder {
                    document: document_id.to_string(),
                    requested: step,
                    current: current.map_or("complete".into(), |c| c.to_string()),
                }));
            }
            let (a, b) = s.submitted_pair(document_id, step)?;
            let (a, b) = (a.clone(), b.clone());
            let mut disagreements =
                diff_values(&serde_json::to_value(&a.draft)?, &serde_json::to_value(&b.draft)?);

            for path in req.resolutions.keys() {
                if !disagreements.iter().any(|d| &d.field_path == path) {
                    return Err(wf(WorkflowError::InvalidResolution {
                        path: path.clone(),
                        message: "not a disagreement".into(),
                    }));
                }
            }
            let resolver = req.third_rater.clone().unwrap_or_else(|| req.resolver.clone());
            for d in &mut disagreements {
                if let Some(v) = req.resolutions.get(&d.field_path) {
                    d.resolved_value = Some(v.clone());
                    d.resolver = Some(resolver.clone());
                }
            }
            let missing: Vec<String> = disagreements
                .iter()
                .filter(|d| d.resolved_value.is_none())
                .map(|d| d.field_path.clone())
                .collect();

            let discard = req.discard || (!missing.is_empty() && req.third_rater.is_some());
            if !missing.is_empty() && !discard {
                return Err(wf(WorkflowError::MissingResolution(missing)));
            }
            let record = ConsolidationRecord {
                document_id: document_id.to_string(),
                step,
                annotator_a: a.annotator_id.clone(),
                annotator_b: b.annotator_id.clone(),
                disagreements,
                third_rater: req.third_rater.clone(),
                outcome: if discard { Outcome::Discarded } else { Outcome::Consensus },
            };

            let resolved = if discard {
                None
            } else {
                let mut merged = serde_json::to_value(&a.draft)?;
                for d in &record.disagreements {
                    let value = d.resolved_value.clone().expect("all resolved");
                    set_path(&mut merged, &d.field_path, value).map_err(|message| {
                        wf(WorkflowError::InvalidResolution { path: d.field_path.clone(), message })
                    })?;
                }
                let merged: FactcheckDocument = serde_json::from_value(merged).map_err(|e| {
                    wf(WorkflowError::InvalidResolution { path: String::new(), message: e.to_string() })
                })?;
                check_draft(&merged, step, s.k)?;
                if step == Step::MergeRevise {
                    validate_dataset(std::slice::from_ref(&merged), DatasetOptions { k: s.k, strict: true })?;
                }
                Some(merged)
            };

            let status = if discard { SessionStatus::Discarded } else { SessionStatus::Consolidated };
            for id in [&a.session_id, &b.session_id] {
                s.state.sessions.get_mut(id).expect("exists").status = status;
            }
            let doc = s.state.documents.get_mut(document_id).expect("checked");
            doc.consolidations.push(record.clone());
            match resolved {
                Some(merged) => {
                    doc.current = merged;
                    doc.step = step.next();
                }
                None => doc.discarded = true,
            }
            Ok(record)
        })
    }

    /// Appends annotator-collected evidence to a claim of a step-2 draft.
    pub fn add_manual_evidence(
        &mut self,
        session_id: &str,
        requester: &str,
        claim_id: &str,
        item: ManualEvidence,
    ) -> Result<AnnotationSession> {
        self.mutate(|s| {
            let session = s.editable(session_id, requester)?;
            if session.step != Step::StanceCorrect {
                return Err(wf(WorkflowError::WrongStep));
            }
            if item.snippet.trim().is_empty() {
                let mut e = ValidationError::default();
                e.push("snippet", "snippet must be non-empty");
                return Err(e.into());
            }
            let entry = s.state.sessions.get_mut(session_id).expect("checked");
            let claim = entry
                .draft
                .find_claim_mut(claim_id)
                .ok_or_else(|| wf(WorkflowError::UnknownClaim(claim_id.to_string())))?;
            let n = claim.evidence.iter().filter(|e| e.is_manual()).count() + 1;
            let url = item
                .url
                .filter(|u| !u.trim().is_empty())
                .unwrap_or_else(|| format!("{MANUAL_URL_PREFIX}{claim_id}:{n}"));
            let mut ev = EvidenceItem::new(item.query, url, item.snippet);
            ev.reliability = item.reliability;
            ev.stance = item.stance;
            ev.sufficient_alone = item.sufficient_alone;
            ev.manual = true;
            let mut errs = ValidationError::default();
            if !ev.url.starts_with(MANUAL_URL_PREFIX) && reqwest::Url::parse(&ev.url).is_err() {
                errs.push("url", format!("invalid url {:?}", ev.url));
            }
            errs.into_result()?;
            claim.evidence.push(ev);
            Ok(entry.clone())
        })
    }

    /// Documents consolidated through step 3, discarded ones excluded.
    pub fn export(&self, filter: &ExportFilter) -> Result<Vec<FactcheckDocument>> {
        let docs: Vec<FactcheckDocument> = self
            .state
            .documents
            .values()
            .filter(|d| d.is_complete())
            .filter(|d| filter.source.is_none_or(|s| d.current.source == s))
            .map(|d| d.current.clone())
            .collect();
        validate_dataset(&docs, DatasetOptions { k: self.k, strict: true })?;
        Ok(docs)
    }
}

fn session_no(s: &AnnotationSession) -> u64 {
    s.session_id.trim_start_matches("sess-").parse().unwrap_or(u64::MAX)
}
