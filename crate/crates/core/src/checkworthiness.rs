//! Sentence and claim checkworthiness, claim category and importance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClaimCategory, ImportanceLevel};
use crate::prompts;
use crate::providers::CompletionProvider;

fn first_word(raw: &str) -> String {
    raw.split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '-')
        .to_lowercase()
}

/// Reads a yes/no style answer from its first word.
pub fn parse_sentence_checkworthy(raw: &str) -> Result<bool> {
    match first_word(raw).as_str() {
        "yes" | "true" | "checkworthy" | "check-worthy" => Ok(true),
        "no" | "false" | "not" | "non-checkworthy" | "non-check-worthy" => Ok(false),
        _ => Err(Error::Classification { raw: raw.to_string() }),
    }
}

pub fn classify_sentence(sentence: &str, provider: &dyn CompletionProvider) -> Result<bool> {
    let req = prompts::SENTENCE_CHECKWORTHY.render(&[("sentence", sentence)])?;
    parse_sentence_checkworthy(&provider.complete(&req)?)
}

/// A claim category plus whether the model marked it as commonsense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimLabel {
    pub category: ClaimCategory,
    #[serde(default)]
    pub commonsense: bool,
}

impl ClaimLabel {
    pub fn new(category: ClaimCategory) -> Self {
        Self { category, commonsense: false }
    }
}

fn squash(raw: &str) -> String {
    raw.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Picks the category whose marker occurs earliest in the answer.
pub fn parse_claim_category(raw: &str) -> Result<ClaimLabel> {
    let text = format!(" {} ", squash(raw));
    const MARKERS: &[(&str, ClaimCategory)] = &[
        (" not a claim ", ClaimCategory::NotAClaim),
        (" not claim ", ClaimCategory::NotAClaim),
        (" opinion ", ClaimCategory::Opinion),
        (" factual ", ClaimCategory::Factual),
        (" fact ", ClaimCategory::Factual),
        (" others ", ClaimCategory::Other),
        (" other ", ClaimCategory::Other),
    ];
    let category = MARKERS
        .iter()
        .filter_map(|(m, c)| text.find(m).map(|p| (p, *c)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Classification { raw: raw.to_string() })?;
    let commonsense = category == ClaimCategory::Factual && (text.contains(" commonsense ") || text.contains(" common sense "));
    Ok(ClaimLabel { category, commonsense })
}

pub fn classify_claim(claim: &str, provider: &dyn CompletionProvider) -> Result<ClaimLabel> {
    let req = prompts::CLAIM_CATEGORY.render(&[("claim", claim)])?;
    parse_claim_category(&provider.complete(&req)?)
}

pub fn parse_importance(raw: &str) -> Result<ImportanceLevel> {
    let text = format!(" {} ", squash(raw));
    const MARKERS: &[(&str, ImportanceLevel)] = &[
        (" most important ", ImportanceLevel::MostImportant),
        (" intermediate ", ImportanceLevel::Intermediate),
        (" less important ", ImportanceLevel::LessImportant),
        (" least important ", ImportanceLevel::LessImportant),
    ];
    MARKERS
        .iter()
        .filter_map(|(m, l)| text.find(m).map(|p| (p, *l)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, l)| l)
        .ok_or_else(|| Error::Classification { raw: raw.to_string() })
}

/// Importance of one statement (claim or sentence) for answering the question.
pub fn rank_importance(
    question: &str,
    response: &str,
    statement: &str,
    provider: &dyn CompletionProvider,
) -> Result<ImportanceLevel> {
    let req = prompts::IMPORTANCE.render(&[("question", question), ("response", response), ("statement", statement)])?;
    parse_importance(&provider.complete(&req)?)
}

/// A sentence is as important as its most important claim.
pub fn sentence_importance(claims: impl IntoIterator<Item = ImportanceLevel>) -> ImportanceLevel {
    claims.into_iter().min().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockCompletion, TranscriptEntry};

    #[test]
    fn sentence_answers() {
        assert!(parse_sentence_checkworthy("Yes.").unwrap());
        assert!(parse_sentence_checkworthy("  true, it states a fact").unwrap());
        assert!(!parse_sentence_checkworthy("No").unwrap());
        assert!(!parse_sentence_checkworthy("Not checkworthy").unwrap());
        assert!(matches!(parse_sentence_checkworthy("maybe"), Err(Error::Classification { .. })));
    }

    #[test]
    fn claim_categories() {
        assert_eq!(parse_claim_category("factual claim").unwrap(), ClaimLabel::new(ClaimCategory::Factual));
        assert_eq!(parse_claim_category("Opinion.").unwrap().category, ClaimCategory::Opinion);
        assert_eq!(parse_claim_category("Not a claim").unwrap().category, ClaimCategory::NotAClaim);
        assert_eq!(parse_claim_category("others").unwrap().category, ClaimCategory::Other);
        assert_eq!(
            parse_claim_category("opinion, not a factual claim").unwrap().category,
            ClaimCategory::Opinion
        );
        let cs = parse_claim_category("Factual claim (commonsense)").unwrap();
        assert!(cs.commonsense && cs.category == ClaimCategory::Factual);
        assert!(parse_claim_category("hmm").is_err());
    }

    #[test]
    fn importance_levels() {
        assert_eq!(parse_importance("Most important").unwrap(), ImportanceLevel::MostImportant);
        assert_eq!(parse_importance("less important.").unwrap(), ImportanceLevel::LessImportant);
        assert_eq!(parse_importance("intermediate").unwrap(), ImportanceLevel::Intermediate);
        assert!(parse_importance("unknown").is_err());
        assert_eq!(
            sentence_importance([ImportanceLevel::LessImportant, ImportanceLevel::MostImportant]),
            ImportanceLevel::MostImportant
        );
        assert_eq!(sentence_importance([]), ImportanceLevel::Intermediate);
    }

    #[test]
    fn classify_through_provider() {
        let p = MockCompletion::new(vec![
            TranscriptEntry::for_template("sentence_checkworthy", "no").when("sentence", "I think so!"),
            TranscriptEntry::for_template("sentence_checkworthy", "yes"),
            TranscriptEntry::for_template("claim_category", "opinion"),
        ]);
        assert!(!classify_sentence("I think so!", &p).unwrap());
        assert!(classify_sentence("Canada has a king.", &p).unwrap());
        assert_eq!(classify_claim("Cats are best.", &p).unwrap().category, ClaimCategory::Opinion);
    }
}
