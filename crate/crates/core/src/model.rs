//! Benchmark data model: documents, sentences, atomic claims, evidence and
//! edit operations, plus the JSON Lines record format.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::text::normalize_whitespace;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EVIDENCE_K: usize = 5;
pub const MANUAL_URL_PREFIX: &str = "manual:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    InHouse,
    DollyClosedQa,
    DollyOpenQa,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocumentVerdict {
    FactuallyCorrect,
    ContainsErrors,
    NoCheckworthyClaims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimCategory {
    Factual,
    Opinion,
    NotAClaim,
    Other,
}

impl ClaimCategory {
    pub const ALL: [ClaimCategory; 4] = [
        ClaimCategory::Factual,
        ClaimCategory::Opinion,
        ClaimCategory::NotAClaim,
        ClaimCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimCategory::Factual => "factual",
            ClaimCategory::Opinion => "opinion",
            ClaimCategory::NotAClaim => "not-a-claim",
            ClaimCategory::Other => "other",
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceLevel {
    MostImportant,
    #[default]
    Intermediate,
    LessImportant,
}

impl ImportanceLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ImportanceLevel::MostImportant => "most-important",
            ImportanceLevel::Intermediate => "intermediate",
            ImportanceLevel::LessImportant => "less-important",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reliability {
    Reliable,
    #[default]
    Unknown,
    Unreliable,
}

/// Four-label stance of one evidence item, plus the `unassessed` sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stance {
    CompletelySupport,
    PartiallySupport,
    Refute,
    Irrelevant,
    #[default]
    Unassessed,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::CompletelySupport => "completely-support",
            Stance::PartiallySupport => "partially-support",
            Stance::Refute => "refute",
            Stance::Irrelevant => "irrelevant",
            Stance::Unassessed => "unassessed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    True,
    False,
    NotEnoughEvidence,
    #[default]
    Unassessed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::NotEnoughEvidence => "not-enough-evidence",
            Verdict::Unassessed => "unassessed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StanceLabelSpace {
    #[default]
    FourLabel,
    ThreeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    DeleteClaim,
    Replace,
    DeleteSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditOperation {
    pub kind: EditKind,
    #[serde(default)]
    pub target_span: Option<String>,
    #[serde(default)]
    pub replacement: Option<String>,
}

impl EditOperation {
    pub fn delete_claim() -> Self {
        Self { kind: EditKind::DeleteClaim, target_span: None, replacement: None }
    }

    pub fn replace(target: impl Into<String>, replacement: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Replace,
            target_span: Some(target.into()),
            replacement: Some(replacement.into()),
        }
    }

    pub fn delete_span(target: impl Into<String>) -> Self {
        Self { kind: EditKind::DeleteSpan, target_span: Some(target.into()), replacement: None }
    }

    /// Shape check that does not depend on the claim text.
    pub fn check_shape(&self) -> std::result::Result<(), String> {
        let has_target = self.target_span.as_deref().is_some_and(|s| !s.is_empty());
        match (self.kind, has_target, self.replacement.is_some()) {
            (EditKind::DeleteClaim, false, false) => Ok(()),
            (EditKind::DeleteClaim, _, _) => Err("delete-claim takes no target or replacement".into()),
            (EditKind::Replace, true, true) => {
                if self.target_span == self.replacement {
                    Err("replace must change the target span".into())
                } else {
                    Ok(())
                }
            }
            (EditKind::Replace, _, _) => Err("replace requires target_span and replacement".into()),
            (EditKind::DeleteSpan, true, false) => Ok(()),
            (EditKind::DeleteSpan, _, _) => Err("delete-span requires target_span only".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub query: String,
    pub url: String,
    pub snippet: String,
    #[serde(default)]
    pub reliability: Reliability,
    #[serde(default)]
    pub stance: Stance,
    #[serde(default)]
    pub sufficient_alone: bool,
    /// Supplied by an annotator rather than the retrieval system.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub manual: bool,
}

impl EvidenceItem {
    pub fn new(query: impl Into<String>, url: impl Into<String>, snippet: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            url: url.into(),
            snippet: snippet.into(),
            reliability: Reliability::Unknown,
            stance: Stance::Unassessed,
            sufficient_alone: false,
            manual: false,
        }
    }

    pub fn is_manual(&self) -> bool {
        self.manual || self.url.starts_with(MANUAL_URL_PREFIX)
    }

    fn validate_into(&self, path: &str, errs: &mut ValidationError) {
        if self.snippet.trim().is_empty() {
            errs.push(format!("{path}.snippet"), "snippet must be non-empty");
        }
        if !self.url.starts_with(MANUAL_URL_PREFIX) && reqwest::Url::parse(&self.url).is_err() {
            errs.push(format!("{path}.url"), format!("invalid url {:?}", self.url));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub id: String,
    pub text: String,
    pub category: ClaimCategory,
    #[serde(default)]
    pub importance: ImportanceLevel,
    #[serde(default)]
    pub evidence: Vec<EvidenceItem>,
    #[serde(default)]
    pub verdict: Verdict,
    #[serde(default)]
    pub edits: Vec<EditOperation>,
    #[serde(default)]
    pub revised_text: Option<String>,
}

impl AtomicClaim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            category: ClaimCategory::Factual,
            importance: ImportanceLevel::Intermediate,
            evidence: Vec::new(),
            verdict: Verdict::Unassessed,
            edits: Vec::new(),
            revised_text: None,
        }
    }

    pub fn is_checkworthy(&self) -> bool {
        self.category == ClaimCategory::Factual
    }

    pub fn is_deleted(&self) -> bool {
        self.edits.iter().any(|e| e.kind == EditKind::DeleteClaim)
    }

    /// Text after edits, `None` when the claim was deleted.
    pub fn final_text(&self) -> Option<&str> {
        if self.is_deleted() {
            None
        } else {
            Some(self.revised_text.as_deref().unwrap_or(&self.text))
        }
    }

    fn validate_into(&self, path: &str, k: usize, errs: &mut ValidationError) {
        if self.id.is_empty() {
            errs.push(format!("{path}.id"), "id must be non-empty");
        }
        if self.text.trim().is_empty() {
            errs.push(format!("{path}.text"), "claim text must be non-empty");
        }
        if self.verdict != Verdict::Unassessed && self.category != ClaimCategory::Factual {
            errs.push(format!("{path}.verdict"), "only factual claims carry a verdict");
        }
        let automatic = self.evidence.iter().filter(|e| !e.is_manual()).count();
        if automatic > k {
            errs.push(
                format!("{path}.evidence"),
                format!("{automatic} retrieved evidence items exceed k={k}"),
            );
        }
        for (i, ev) in self.evidence.iter().enumerate() {
            ev.validate_into(&format!("{path}.evidence[{i}]"), errs);
        }

        let mut current = Some(self.text.clone());
        for (i, op) in self.edits.iter().enumerate() {
            let edit_path = format!("{path}.edits[{i}]");
            if let Err(msg) = op.check_shape() {
                errs.push(edit_path, msg);
                current = None;
                continue;
            }
            if let Some(text) = current.as_deref() {
                match crate::revision::apply_edit(text, op) {
                    Ok(next) => current = next,
                    Err(e) => {
                        errs.push(edit_path, e.to_string());
                        current = None;
                    }
                }
            }
        }
        let deleted = self.is_deleted();
        match (&self.revised_text, self.edits.is_empty() || deleted) {
            (Some(_), true) => errs.push(
                format!("{path}.revised_text"),
                "revised_text requires non-deleting edits",
            ),
            (None, false) => errs.push(format!("{path}.revised_text"), "edited claim needs revised_text"),
            (Some(revised), false) => {
                if revised == &self.text {
                    errs.push(format!("{path}.revised_text"), "revised_text must differ from text");
                }
            }
            (None, true) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub id: String,
    pub text: String,
    pub checkworthy: bool,
    pub category: ClaimCategory,
    #[serde(default)]
    pub importance: ImportanceLevel,
    #[serde(default)]
    pub claims: Vec<AtomicClaim>,
    #[serde(default)]
    pub revised_text: Option<String>,
    #[serde(default)]
    pub deleted: bool,
}

impl SentenceUnit {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            checkworthy: true,
            category: ClaimCategory::Factual,
            importance: ImportanceLevel::Intermediate,
            claims: Vec::new(),
            revised_text: None,
            deleted: false,
        }
    }

    fn validate_into(&self, path: &str, k: usize, errs: &mut ValidationError) {
        if self.id.is_empty() {
            errs.push(format!("{path}.id"), "id must be non-empty");
        }
        if self.checkworthy != (self.category == ClaimCategory::Factual) {
            errs.push(format!("{path}.checkworthy"), "checkworthy must equal (category == factual)");
        }
        if !self.checkworthy && !self.claims.is_empty() {
            errs.push(format!("{path}.claims"), "claims attached to a non-checkworthy sentence");
        }
        if self.checkworthy && !self.deleted && self.claims.is_empty() {
            errs.push(format!("{path}.claims"), "checkworthy sentence needs at least one claim");
        }
        for (i, claim) in self.claims.iter().enumerate() {
            claim.validate_into(&format!("{path}.claims[{i}]"), k, errs);
        }
    }
}

/// One benchmark record: a (question, response) pair with its full
/// decomposition tree and revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactcheckDocument {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub source: Source,
    pub question: String,
    pub response: String,
    #[serde(default)]
    pub sentences: Vec<SentenceUnit>,
    #[serde(default)]
    pub revised_response: Option<String>,
    #[serde(default)]
    pub document_verdict: Option<DocumentVerdict>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl FactcheckDocument {
    pub fn new(id: impl Into<String>, question: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            source: Source::Other,
            question: question.into(),
            response: response.into(),
            sentences: Vec::new(),
            revised_response: None,
            document_verdict: None,
        }
    }

    pub fn claims(&self) -> impl Iterator<Item = &AtomicClaim> {
        self.sentences.iter().flat_map(|s| s.claims.iter())
    }

    pub fn claims_mut(&mut self) -> impl Iterator<Item = &mut AtomicClaim> {
        self.sentences.iter_mut().flat_map(|s| s.claims.iter_mut())
    }

    pub fn checkworthy_claims(&self) -> impl Iterator<Item = &AtomicClaim> {
        self.claims().filter(|c| c.is_checkworthy())
    }

    pub fn find_claim_mut(&mut self, claim_id: &str) -> Option<&mut AtomicClaim> {
        self.claims_mut().find(|c| c.id == claim_id)
    }

    pub fn has_changes(&self) -> bool {
        self.sentences
            .iter()
            .any(|s| s.deleted || s.revised_text.is_some() || s.claims.iter().any(|c| !c.edits.is_empty()))
    }

    /// Recomputes `document_verdict` from the claim verdicts.
    pub fn derive_verdict(&self) -> DocumentVerdict {
        if self.checkworthy_claims().next().is_none() {
            DocumentVerdict::NoCheckworthyClaims
        } else if self.claims().any(|c| c.verdict == Verdict::False) {
            DocumentVerdict::ContainsErrors
        } else {
            DocumentVerdict::FactuallyCorrect
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        self.validate_with_k(DEFAULT_EVIDENCE_K)
    }

    pub fn validate_with_k(&self, k: usize) -> std::result::Result<(), ValidationError> {
        let mut errs = ValidationError::default();
        if self.id.is_empty() {
            errs.push("id", "id must be non-empty");
        }
        let normalized_response = normalize_whitespace(&self.response);
        let mut cursor = 0usize;
        let mut seen = HashSet::new();
        for (i, sentence) in self.sentences.iter().enumerate() {
            let path = format!("sentences[{i}]");
            if !seen.insert(sentence.id.as_str()) {
                errs.push(format!("{path}.id"), format!("duplicate sentence id {:?}", sentence.id));
            }
            // Sentences copied verbatim from the response must keep its order;
            // rewritten (decontextualized) sentences are not located.
            let needle = normalize_whitespace(&sentence.text);
            if !needle.is_empty() {
                if let Some(pos) = normalized_response[cursor..].find(&needle) {
                    cursor += pos + needle.len();
                } else if normalized_response.contains(&needle) {
                    errs.push(format!("{path}.text"), "sentence out of response order");
                }
            }
            sentence.validate_into(&path, k, &mut errs);
        }
        let mut claim_ids = HashSet::new();
        for (si, sentence) in self.sentences.iter().enumerate() {
            for (ci, claim) in sentence.claims.iter().enumerate() {
                if !claim_ids.insert(claim.id.as_str()) {
                    errs.push(
                        format!("sentences[{si}].claims[{ci}].id"),
                        format!("duplicate claim id {:?}", claim.id),
                    );
                }
            }
        }
        let changed = self.has_changes();
        if self.revised_response.is_some() != changed {
            errs.push(
                "revised_response",
                if changed {
                    "edited document requires revised_response"
                } else {
                    "revised_response present without any edit or deletion"
                },
            );
        }
        let any_false = self.claims().any(|c| c.verdict == Verdict::False);
        match self.document_verdict {
            Some(DocumentVerdict::ContainsErrors) if !any_false => {
                errs.push("document_verdict", "contains-errors requires a false claim")
            }
            Some(v) if any_false && v != DocumentVerdict::ContainsErrors => {
                errs.push("document_verdict", "document with a false claim must be contains-errors")
            }
            None if any_false => errs.push("document_verdict", "document with a false claim must be contains-errors"),
            Some(DocumentVerdict::NoCheckworthyClaims) if self.checkworthy_claims().next().is_some() => {
                errs.push("document_verdict", "document has checkworthy claims")
            }
            _ => {}
        }
        errs.into_result()
    }
}

/// Validates and renders one document as a single JSON line (no newline).
pub fn serialize_document(doc: &FactcheckDocument) -> Result<String> {
    doc.validate()?;
    Ok(serde_json::to_string(doc)?)
}

pub fn parse_document(line: &str) -> Result<FactcheckDocument> {
    Ok(serde_json::from_str(line)?)
}

/// Reads JSON Lines, or a single JSON array of documents.
pub fn read_documents(reader: impl BufRead) -> Result<Vec<FactcheckDocument>> {
    let mut contents = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut contents)?;
    if contents.trim_start().starts_with('[') {
        return serde_json::from_str(&contents).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() });
    }
    contents
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn write_documents<'a>(
    mut writer: impl Write,
    docs: impl IntoIterator<Item = &'a FactcheckDocument>,
) -> Result<()> {
    for doc in docs {
        writer.write_all(serialize_document(doc)?.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_documents(path: impl AsRef<std::path::Path>) -> Result<Vec<FactcheckDocument>> {
    let file = std::fs::File::open(path)?;
    read_documents(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub documents: usize,
    pub sentences: usize,
    pub checkworthy_sentences: usize,
    pub claims: usize,
    pub checkworthy_claims: usize,
    pub evidence: usize,
}

impl DatasetStats {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize, usize, usize) {
        (
            self.documents,
            self.sentences,
            self.checkworthy_sentences,
            self.claims,
            self.checkworthy_claims,
            self.evidence,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DatasetOptions {
    pub k: usize,
    /// Require exactly `k` retrieved evidence items per checkworthy claim in
    /// aggregate. Annotator-supplied evidence is not counted.
    pub strict: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self { k: DEFAULT_EVIDENCE_K, strict: false }
    }
}

pub fn validate_dataset(
    records: &[FactcheckDocument],
    opts: DatasetOptions,
) -> std::result::Result<DatasetStats, ValidationError> {
    let mut errs = ValidationError::default();
    let mut stats = DatasetStats::default();
    let mut doc_ids = HashSet::new();
    let mut retrieved = 0usize;
    for (di, doc) in records.iter().enumerate() {
        if !doc_ids.insert(doc.id.as_str()) {
            errs.push(format!("[{di}].id"), format!("duplicate document id {:?}", doc.id));
        }
        if let Err(e) = doc.validate_with_k(opts.k) {
            for (p, m) in e.violations {
                errs.push(format!("[{di}].{p}"), m);
            }
        }
        stats.documents += 1;
        for s in &doc.sentences {
            stats.sentences += 1;
            stats.checkworthy_sentences += usize::from(s.checkworthy);
            for c in &s.claims {
                stats.claims += 1;
                if c.is_checkworthy() {
                    stats.checkworthy_claims += 1;
                }
                stats.evidence += c.evidence.len();
                retrieved += c.evidence.iter().filter(|e| !e.is_manual()).count();
            }
        }
    }
    if opts.strict && retrieved != opts.k * stats.checkworthy_claims {
        errs.push(
            "evidence",
            format!(
                "strict mode expects {} retrieved evidence items (k={} x {} checkworthy claims), found {}",
                opts.k * stats.checkworthy_claims,
                opts.k,
                stats.checkworthy_claims,
                retrieved
            ),
        );
    }
    errs.into_result().map(|_| stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn evidence(n: usize) -> Vec<EvidenceItem> {
        (0..n)
            .map(|i| EvidenceItem::new("q", format!("https://example.org/{i}"), format!("snippet {i}")))
            .collect()
    }

    fn doc_with_claim(id: &str, n_evidence: usize) -> FactcheckDocument {
        let mut doc = FactcheckDocument::new(id, "Q?", "Canada is a constitutional monarchy.");
        let mut s = SentenceUnit::new(format!("{id}-s0"), "Canada is a constitutional monarchy.");
        let mut c = AtomicClaim::new(format!("{id}-c0"), "Canada is a constitutional monarchy.");
        c.evidence = evidence(n_evidence);
        s.claims.push(c);
        doc.sentences.push(s);
        doc
    }

    #[test]
    fn empty_document_serializes_with_empty_sentences() {
        let doc = FactcheckDocument::new("d0", "q", "r");
        let line = serialize_document(&doc).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["sentences"], serde_json::json!([]));
        assert_eq!(parse_document(&line).unwrap(), doc);
    }

    #[test]
    fn five_evidence_items_serialize_as_five_element_array() {
        let doc = doc_with_claim("d1", 5);
        let v: serde_json::Value = serde_json::from_str(&serialize_document(&doc).unwrap()).unwrap();
        assert_eq!(v["sentences"][0]["claims"][0]["evidence"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn enum_values_are_lowercase_hyphenated() {
        let mut doc = doc_with_claim("d1", 1);
        doc.source = Source::DollyClosedQa;
        doc.sentences[0].claims[0].evidence[0].stance = Stance::CompletelySupport;
        doc.sentences[0].claims[0].verdict = Verdict::NotEnoughEvidence;
        doc.document_verdict = Some(DocumentVerdict::FactuallyCorrect);
        let line = serialize_document(&doc).unwrap();
        for needle in [
            "\"dolly-closed-qa\"",
            "\"completely-support\"",
            "\"not-enough-evidence\"",
            "\"factually-correct\"",
            "\"intermediate\"",
        ] {
            assert!(line.contains(needle), "{needle} missing from {line}");
        }
    }

    #[test]
    fn unknown_enum_strings_rejected() {
        let doc = doc_with_claim("d1", 1);
        let line = serialize_document(&doc).unwrap().replace("\"factual\"", "\"rumour\"");
        assert!(parse_document(&line).is_err());
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut doc = doc_with_claim("d1", 1);
        doc.sentences[0].claims[0].evidence[0].snippet.clear();
        doc.sentences[0].claims[0].verdict = Verdict::False;
        let err = serialize_document(&doc).unwrap_err();
        let Error::Validation(v) = err else { panic!("expected validation error") };
        let paths = v.field_paths();
        assert!(paths.contains(&"sentences[0].claims[0].evidence[0].snippet".to_string()));
        assert!(paths.contains(&"document_verdict".to_string()));
    }

    #[test]
    fn edit_invariants() {
        let mut doc = doc_with_claim("d1", 0);
        let claim = &mut doc.sentences[0].claims[0];
        claim.edits.push(EditOperation::replace("Norway", "Sweden"));
        claim.revised_text = Some("x".into());
        doc.revised_response = Some("x".into());
        let v = doc.validate().unwrap_err();
        assert!(v.field_paths().contains(&"sentences[0].claims[0].edits[0]".to_string()));

        let bad = EditOperation { kind: EditKind::Replace, target_span: Some("a".into()), replacement: None };
        assert!(bad.check_shape().is_err());
        assert!(EditOperation::delete_span("x").check_shape().is_ok());
        let bad = EditOperation { kind: EditKind::DeleteClaim, target_span: Some("a".into()), replacement: None };
        assert!(bad.check_shape().is_err());
    }

    #[test]
    fn revised_response_iff_changes() {
        let mut doc = doc_with_claim("d1", 0);
        doc.revised_response = Some("other".into());
        assert!(doc.validate().is_err());
        doc.revised_response = None;
        doc.sentences[0].claims[0].edits.push(EditOperation::delete_claim());
        assert!(doc.validate().is_err());
        doc.revised_response = Some(String::new());
        doc.validate().unwrap();
    }

    #[test]
    fn sentence_invariants() {
        let mut doc = doc_with_claim("d1", 0);
        doc.sentences[0].checkworthy = false;
        doc.sentences[0].category = ClaimCategory::Opinion;
        let v = doc.validate().unwrap_err();
        assert_eq!(v.field_paths(), vec!["sentences[0].claims"]);
        doc.sentences[0].claims.clear();
        doc.validate().unwrap();
    }

    #[test]
    fn manual_evidence_not_counted_against_k() {
        let mut doc = doc_with_claim("d1", 5);
        let mut manual = EvidenceItem::new("q", "manual:c0-0", "found by hand");
        manual.manual = true;
        doc.sentences[0].claims[0].evidence.push(manual);
        doc.validate().unwrap();
        doc.sentences[0].claims[0].evidence.push(EvidenceItem::new("q", "https://x.org", "s"));
        assert!(doc.validate().is_err());
    }

    #[test]
    fn empty_dataset_is_all_zeros() {
        let stats = validate_dataset(&[], DatasetOptions { k: 5, strict: true }).unwrap();
        assert_eq!(stats.as_tuple(), (0, 0, 0, 0, 0, 0));
    }

    #[test]
    fn strict_mode_requires_k_per_checkworthy_claim() {
        // 2 documents, 3 checkworthy claims, k=5: 15 evidence items required.
        let mut a = doc_with_claim("a", 5);
        let mut extra = AtomicClaim::new("a-c1", "Canada has a parliament.");
        extra.evidence = evidence(5);
        a.sentences[0].claims.push(extra);
        let b = doc_with_claim("b", 4);
        let strict = DatasetOptions { k: 5, strict: true };
        let err = validate_dataset(&[a.clone(), b.clone()], strict).unwrap_err();
        assert!(err.violations[0].1.contains("expects 15"));
        let b = doc_with_claim("b", 5);
        let stats = validate_dataset(&[a, b], strict).unwrap();
        assert_eq!(stats.as_tuple(), (2, 2, 2, 3, 3, 15));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = doc_with_claim("a", 5);
        let err = validate_dataset(&[a.clone(), a], DatasetOptions::default()).unwrap_err();
        assert_eq!(err.field_paths(), vec!["[1].id"]);
    }

    #[test]
    fn array_form_accepted_on_read() {
        let docs = vec![doc_with_claim("a", 1), doc_with_claim("b", 2)];
        let array = serde_json::to_string(&docs).unwrap();
        assert_eq!(read_documents(array.as_bytes()).unwrap(), docs);
        let mut jsonl = Vec::new();
        write_documents(&mut jsonl, &docs).unwrap();
        assert_eq!(read_documents(jsonl.as_slice()).unwrap(), docs);
    }
}
