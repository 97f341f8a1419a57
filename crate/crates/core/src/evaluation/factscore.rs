//! FactScore and the selection filter for hallucination-prone responses.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FactcheckDocument, Stance, Verdict};
use crate::providers::{cosine, EmbeddingProvider};

/// Fraction of checkworthy claims that are verified true with at least one
/// completely supporting evidence item. `None` without checkworthy claims.
/// In strict mode an unassessed checkworthy claim is an error; otherwise it
/// counts as unsupported.
pub fn factscore(doc: &FactcheckDocument, strict: bool) -> Result<Option<f64>> {
    let mut total = 0usize;
    let mut supported = 0usize;
    for claim in doc.checkworthy_claims() {
        total += 1;
        if strict && claim.verdict == Verdict::Unassessed {
            return Err(Error::InvalidInput(format!("claim {} of {} is unassessed", claim.id, doc.id)));
        }
        if claim.verdict == Verdict::True && claim.evidence.iter().any(|e| e.stance == Stance::CompletelySupport) {
            supported += 1;
        }
    }
    Ok((total > 0).then(|| supported as f64 / total as f64))
}

/// Mean over documents that have a FactScore.
pub fn mean_factscore(docs: &[FactcheckDocument], strict: bool) -> Result<Option<f64>> {
    let mut scores = Vec::new();
    for d in docs {
        if let Some(s) = factscore(d, strict)? {
            scores.push(s);
        }
    }
    Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub min_chars: usize,
    pub max_gold_cosine: f64,
    /// Kept documents score strictly below this.
    pub max_factscore: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self { min_chars: 200, max_gold_cosine: 0.5, max_factscore: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Rejection {
    TooShort { chars: usize },
    CloseToGold { cosine: f64 },
    NoCheckworthyClaims,
    FactscoreTooHigh { factscore: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub document_id: String,
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factscore: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
}

/// Keeps long responses that differ from the gold answer (when one is
/// given) and score below the FactScore cut. Checks run in that order.
pub fn select_data(
    docs: &[FactcheckDocument],
    gold_answers: &HashMap<String, String>,
    embedder: &dyn EmbeddingProvider,
    criteria: &SelectionCriteria,
) -> Result<Vec<SelectionDecision>> {
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        let score = factscore(doc, false)?;
        let rejection = (|| -> Result<Option<Rejection>> {
            let chars = doc.response.trim().chars().count();
            if chars < criteria.min_chars {
                return Ok(Some(Rejection::TooShort { chars }));
            }
            if let Some(gold) = gold_answers.get(&doc.id) {
                let sim = cosine(&embedder.embed(&doc.response)?, &embedder.embed(gold)?);
                if sim > criteria.max_gold_cosine {
                    return Ok(Some(Rejection::CloseToGold { cosine: sim }));
                }
            }
            Ok(match score {
                None => Some(Rejection::NoCheckworthyClaims),
                Some(f) if f >= criteria.max_factscore => Some(Rejection::FactscoreTooHigh { factscore: f }),
                Some(_) => None,
            })
        })()?;
        out.push(SelectionDecision {
            document_id: doc.id.clone(),
            kept: rejection.is_none(),
            factscore: score,
            rejection,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomicClaim, EvidenceItem, SentenceUnit};
    use crate::providers::MockEmbedding;

    fn doc(id: &str, response: &str, claims: &[(Verdict, Stance)]) -> FactcheckDocument {
        let mut d = FactcheckDocument::new(id, "q", response);
        let mut s = SentenceUnit::new("s1", response);
        for (i, (v, st)) in claims.iter().enumerate() {
            let mut c = AtomicClaim::new(format!("c{i}"), "x");
            c.verdict = *v;
            let mut e = EvidenceItem::new("q", "https://e.org", "snippet");
            e.stance = *st;
            c.evidence.push(e);
            s.claims.push(c);
        }
        d.sentences.push(s);
        d
    }

    #[test]
    fn counts_supported_claims() {
        let d = doc(
            "d",
            "r",
            &[
                (Verdict::True, Stance::CompletelySupport),
                (Verdict::True, Stance::PartiallySupport),
                (Verdict::False, Stance::Refute),
                (Verdict::True, Stance::CompletelySupport),
            ],
        );
        assert_eq!(factscore(&d, true).unwrap(), Some(0.5));
        assert_eq!(factscore(&FactcheckDocument::new("e", "q", "r"), true).unwrap(), None);
        let un = doc("u", "r", &[(Verdict::Unassessed, Stance::Unassessed)]);
        assert!(factscore(&un, true).is_err());
        assert_eq!(factscore(&un, false).unwrap(), Some(0.0));
    }

    #[test]
    fn selection_order() {
        let long = "word ".repeat(60);
        let docs = vec![
            doc("short", "too short", &[(Verdict::False, Stance::Refute)]),
            doc("good", &long, &[(Verdict::False, Stance::Refute)]),
            doc("high", &long, &[(Verdict::True, Stance::CompletelySupport)]),
            doc("gold", &long, &[(Verdict::False, Stance::Refute)]),
        ];
        let gold = HashMap::from([("gold".to_string(), long.clone())]);
        let out = select_data(&docs, &gold, &MockEmbedding::default(), &SelectionCriteria::default()).unwrap();
        let kept: Vec<&str> = out.iter().filter(|d| d.kept).map(|d| d.document_id.as_str()).collect();
        assert_eq!(kept, vec!["good"]);
        assert!(matches!(out[0].rejection, Some(Rejection::TooShort { chars: 9 })));
        assert!(matches!(out[3].rejection, Some(Rejection::CloseToGold { .. })));
    }
}
