//! Claim correction and response revision.

use std::collections::HashSet;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::metrics::{ngram_distance, normalized_edit_distance, word_overlap};
use crate::model::{AtomicClaim, EditKind, EditOperation, FactcheckDocument, Stance};
use crate::prompts;
use crate::providers::{CompletionProvider, RunStats};
use crate::text::{content_tokens, normalize_whitespace};

static SPACE_BEFORE_PUNCT: Lazy<Regex> = Lazy::new(|| Regex::new(r"\s+([,.;:!?])").unwrap());
static REPEATED_COMMA: Lazy<Regex> = Lazy::new(|| Regex::new(r",\s*,").unwrap());

fn tidy(text: &str) -> String {
    let t = normalize_whitespace(text);
    let t = REPEATED_COMMA.replace_all(&t, ",");
    SPACE_BEFORE_PUNCT.replace_all(&t, "$1").trim_start_matches([',', ' ']).to_string()
}

/// Applies one edit to a text. `Ok(None)` means the claim is deleted. A
/// target span that does not occur in the text is an error.
pub fn apply_edit(text: &str, op: &EditOperation) -> Result<Option<String>> {
    op.check_shape().map_err(Error::Edit)?;
    let target = op.target_span.as_deref().unwrap_or_default();
    match op.kind {
        EditKind::DeleteClaim => Ok(None),
        _ if !text.contains(target) => Err(Error::Edit(format!("target span {target:?} not found in {text:?}"))),
        EditKind::Replace => {
            let replacement = op.replacement.as_deref().unwrap_or_default();
            let at = text.find(target).expect("checked above");
            let mut rest = &text[at + target.len()..];
            // "Jr." replacing a sentence-final name must not leave "Jr.."
            if replacement.ends_with('.') && rest.starts_with('.') {
                rest = &rest[1..];
            }
            Ok(Some(normalize_whitespace(&format!("{}{replacement}{rest}", &text[..at]))))
        }
        EditKind::DeleteSpan => {
            let out = tidy(&text.replacen(target, "", 1));
            if out.is_empty() {
                Err(Error::Edit("delete-span removes the whole text; use delete-claim".into()))
            } else {
                Ok(Some(out))
            }
        }
    }
}

/// Applies edits in order; stops at a deletion.
pub fn apply_edits(text: &str, ops: &[EditOperation]) -> Result<Option<String>> {
    let mut current = text.to_string();
    for op in ops {
        match apply_edit(&current, op)? {
            Some(next) => current = next,
            None => return Ok(None),
        }
    }
    Ok(Some(current))
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}

/// Parses `REPLACE: a => b`, `DELETE_SPAN: a` and `DELETE_CLAIM` lines.
pub fn parse_correction(raw: &str) -> Result<Vec<EditOperation>> {
    let mut ops = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let line = line.trim_start_matches(['-', '*', ' ']);
        let upper = line.to_uppercase();
        if upper.starts_with("DELETE_CLAIM") || upper.starts_with("DELETE CLAIM") {
            ops.push(EditOperation::delete_claim());
        } else if let Some(rest) = strip_tag(line, &upper, &["REPLACE:", "REPLACE "]) {
            let (from, to) = rest
                .split_once("=>")
                .or_else(|| rest.split_once("->"))
                .ok_or_else(|| Error::Edit(format!("replace without `=>`: {line:?}")))?;
            ops.push(EditOperation::replace(strip_quotes(from), strip_quotes(to)));
        } else if let Some(rest) = strip_tag(line, &upper, &["DELETE_SPAN:", "DELETE SPAN:", "DELETE_SPAN "]) {
            ops.push(EditOperation::delete_span(strip_quotes(rest)));
        }
    }
    if ops.is_empty() {
        return Err(Error::Edit(format!("no edit operations in {raw:?}")));
    }
    if ops.iter().any(|o| o.kind == EditKind::DeleteClaim) {
        return Ok(vec![EditOperation::delete_claim()]);
    }
    for op in &ops {
        op.check_shape().map_err(Error::Edit)?;
    }
    Ok(ops)
}

fn strip_tag<'a>(line: &'a str, upper: &str, tags: &[&str]) -> Option<&'a str> {
    tags.iter().find(|t| upper.starts_with(*t)).map(|t| line[t.len()..].trim())
}

/// Sets `edits` and `revised_text` on a claim. An edit that does not apply
/// cleanly turns into deleting the claim.
pub fn set_edits(claim: &mut AtomicClaim, ops: Vec<EditOperation>) -> Result<()> {
    match apply_edits(&claim.text, &ops)? {
        None => {
            claim.edits = vec![EditOperation::delete_claim()];
            claim.revised_text = None;
        }
        Some(text) if text == claim.text => {
            return Err(Error::Edit("edits leave the claim unchanged".into()));
        }
        Some(text) => {
            claim.edits = ops;
            claim.revised_text = Some(text);
        }
    }
    Ok(())
}

/// Asks the completion backend for a minimal correction of a false claim.
/// Unusable output degrades to deleting the claim, recorded in `stats`.
pub fn correct_claim(claim: &mut AtomicClaim, provider: &dyn CompletionProvider, stats: &RunStats) -> Result<()> {
    let evidence: Vec<String> = claim
        .evidence
        .iter()
        .filter(|e| e.stance != Stance::Irrelevant)
        .map(|e| format!("- {}", e.snippet))
        .collect();
    let req = prompts::CORRECTION.render(&[("claim", &claim.text), ("evidence", &evidence.join("\n"))])?;
    let raw = provider.complete(&req)?;
    let outcome = parse_correction(&raw).and_then(|ops| set_edits(claim, ops));
    if let Err(e) = outcome {
        stats.record_degraded(format!("revision: {} correction unusable ({e}), claim deleted", claim.id));
        claim.edits = vec![EditOperation::delete_claim()];
        claim.revised_text = None;
    }
    Ok(())
}

/// Rebuilds one sentence from its claim edits; `None` drops the sentence.
fn merge_sentence(sentence: &crate::model::SentenceUnit) -> Option<String> {
    if sentence.deleted {
        return None;
    }
    if !sentence.checkworthy {
        return Some(normalize_whitespace(&sentence.text));
    }
    if let Some(rev) = &sentence.revised_text {
        return Some(normalize_whitespace(rev));
    }
    if sentence.claims.iter().all(|c| c.edits.is_empty()) {
        return Some(normalize_whitespace(&sentence.text));
    }
    if !sentence.claims.is_empty() && sentence.claims.iter().all(AtomicClaim::is_deleted) {
        return None;
    }
    let mut text = sentence.text.clone();
    let mut clean = true;
    'claims: for claim in sentence.claims.iter().filter(|c| !c.edits.is_empty()) {
        for op in &claim.edits {
            let applied = if op.kind == EditKind::DeleteClaim {
                text.contains(claim.text.as_str()).then(|| tidy(&text.replacen(claim.text.as_str(), "", 1)))
            } else {
                apply_edit(&text, op).ok().flatten()
            };
            match applied {
                Some(next) if !next.is_empty() => text = next,
                _ => {
                    clean = false;
                    break 'claims;
                }
            }
        }
    }
    if clean {
        return Some(normalize_whitespace(&text));
    }
    let surviving: Vec<&str> = sentence.claims.iter().filter_map(AtomicClaim::final_text).collect();
    Some(normalize_whitespace(&surviving.join(" ")))
}

/// Deterministic revision: unchanged sentences are copied, edited sentences
/// rebuilt, fully deleted sentences dropped, and a sentence whose content
/// words all appear in an earlier sentence is removed as redundant.
pub fn merge_response(doc: &FactcheckDocument) -> String {
    let mut kept: Vec<String> = Vec::new();
    let mut seen: Vec<HashSet<String>> = Vec::new();
    for sentence in &doc.sentences {
        let Some(text) = merge_sentence(sentence) else { continue };
        if text.is_empty() {
            continue;
        }
        let words: HashSet<String> = content_tokens(&text).into_iter().collect();
        if !words.is_empty() && seen.iter().any(|earlier| words.is_subset(earlier)) {
            continue;
        }
        seen.push(words);
        kept.push(text);
    }
    kept.join(" ")
}

/// Revision by prompting with the response and the corrected claims.
pub fn revise_response_llm(doc: &FactcheckDocument, provider: &dyn CompletionProvider) -> Result<String> {
    let claims: Vec<&str> = doc.checkworthy_claims().filter_map(AtomicClaim::final_text).collect();
    let claims = serde_json::to_string(&claims)?;
    let req = if doc.question.trim().is_empty() {
        prompts::REVISE_NO_QUESTION.render(&[("response", &doc.response), ("claims", &claims)])?
    } else {
        prompts::REVISE_WITH_QUESTION.render(&[
            ("question", &doc.question),
            ("response", &doc.response),
            ("claims", &claims),
        ])?
    };
    Ok(provider.complete(&req)?.trim().to_string())
}

/// How much of the original a revision keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub normalized_edit_distance: f64,
    pub word_overlap: f64,
    pub ngram_distance: f64,
}

pub fn preservation_report(original: &str, revised: &str) -> PreservationReport {
    PreservationReport {
        normalized_edit_distance: normalized_edit_distance(original, revised),
        word_overlap: word_overlap(original, revised),
        ngram_distance: ngram_distance(original, revised, 2),
    }
}

/// Both revisions of one document, written to `revisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub document_id: String,
    pub original: String,
    pub merged: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompted: Option<String>,
    pub merged_preservation: PreservationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompted_preservation: Option<PreservationReport>,
}

impl RevisionRecord {
    pub fn new(doc: &FactcheckDocument, merged: String, prompted: Option<String>) -> Self {
        let original = normalize_whitespace(&doc.response);
        Self {
            document_id: doc.id.clone(),
            merged_preservation: preservation_report(&original, &merged),
            prompted_preservation: prompted.as_deref().map(|p| preservation_report(&original, p)),
            original,
            merged,
            prompted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClaimCategory, SentenceUnit};
    use crate::providers::{MockCompletion, TranscriptEntry};

    #[test]
    fn replace_ending_in_period_absorbs_terminal_period() {
        let op = EditOperation::replace("William O. Douglas", "William J. Brennan Jr.");
        assert_eq!(
            apply_edit("The justice was William O. Douglas.", &op).unwrap().unwrap(),
            "The justice was William J. Brennan Jr."
        );
    }

    #[test]
    fn edits_apply() {
        let op = EditOperation::replace("O. Douglas", "J. Brennan Jr.");
        assert_eq!(apply_edit("Justice William O. Douglas.", &op).unwrap().unwrap(), "Justice William J. Brennan Jr.");
        assert_eq!(apply_edit("He was, sadly, late.", &EditOperation::delete_span("sadly,")).unwrap().unwrap(), "He was, late.");
        assert_eq!(apply_edit("He was very late.", &EditOperation::delete_span("very")).unwrap().unwrap(), "He was late.");
        assert_eq!(apply_edit("x", &EditOperation::delete_claim()).unwrap(), None);
        assert!(apply_edit("abc", &EditOperation::replace("zzz", "y")).is_err());
        assert!(apply_edit("abc", &EditOperation::delete_span("abc")).is_err());
    }

    #[test]
    fn correction_parsing() {
        assert_eq!(
            parse_correction("REPLACE: \"was still alive\" => \"had already passed away\"").unwrap(),
            vec![EditOperation::replace("was still alive", "had already passed away")]
        );
        assert_eq!(parse_correction("DELETE_SPAN: very\n").unwrap(), vec![EditOperation::delete_span("very")]);
        assert_eq!(
            parse_correction("REPLACE: a => b\nDELETE_CLAIM").unwrap(),
            vec![EditOperation::delete_claim()]
        );
        assert!(parse_correction("I would change it").is_err());
        assert!(parse_correction("REPLACE: a => a").is_err());
    }

    #[test]
    fn bad_correction_degrades_to_delete() {
        let stats = RunStats::default();
        let mut claim = AtomicClaim::new("c1", "The sky is green.");
        let p = MockCompletion::new(vec![TranscriptEntry::for_template("correction", "REPLACE: purple => blue")]);
        correct_claim(&mut claim, &p, &stats).unwrap();
        assert!(claim.is_deleted());
        assert_eq!(stats.degraded_paths().len(), 1);

        let mut claim = AtomicClaim::new("c1", "The sky is green.");
        let p = MockCompletion::new(vec![TranscriptEntry::for_template("correction", "REPLACE: green => blue")]);
        correct_claim(&mut claim, &p, &stats).unwrap();
        assert_eq!(claim.revised_text.as_deref(), Some("The sky is blue."));
    }

    fn sentence(id: &str, text: &str, claims: Vec<AtomicClaim>) -> SentenceUnit {
        let mut s = SentenceUnit::new(id, text);
        s.claims = claims;
        s
    }

    #[test]
    fn merge_copies_untouched_and_drops_deleted() {
        let mut doc = FactcheckDocument::new("d", "q", "A is B. C is D. I love it.");
        let mut c2 = AtomicClaim::new("c2", "C is D.");
        c2.edits = vec![EditOperation::delete_claim()];
        let mut opinion = SentenceUnit::new("s3", "I love it.");
        opinion.checkworthy = false;
        opinion.category = ClaimCategory::Opinion;
        doc.sentences = vec![
            sentence("s1", "A is B.", vec![AtomicClaim::new("c1", "A is B.")]),
            sentence("s2", "C is D.", vec![c2]),
            opinion,
        ];
        assert_eq!(merge_response(&doc), "A is B. I love it.");
    }

    #[test]
    fn merge_removes_redundant_later_sentence() {
        let mut doc = FactcheckDocument::new("d", "q", "x");
        let mut c = AtomicClaim::new("c2", "Paris is in Germany.");
        set_edits(&mut c, vec![EditOperation::replace("Germany", "France")]).unwrap();
        doc.sentences = vec![
            sentence("s1", "Paris is the capital of France.", vec![AtomicClaim::new("c1", "Paris is the capital of France.")]),
            sentence("s2", "Paris is in Germany.", vec![c]),
        ];
        assert_eq!(merge_response(&doc), "Paris is the capital of France.");
    }

    #[test]
    fn revision_prompt_choice() {
        let doc = FactcheckDocument::new("d", "", "A is B.");
        let p = MockCompletion::echo("response");
        assert_eq!(revise_response_llm(&doc, &p).unwrap(), "A is B.");
        let report = preservation_report("A is B.", "A is B.");
        assert_eq!(report.normalized_edit_distance, 0.0);
        assert_eq!(report.word_overlap, 1.0);
    }
}
