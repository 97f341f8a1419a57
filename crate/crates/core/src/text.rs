//! Tokenization shared by every lexical metric, the re-ranker and the
//! de-duplication rule.

use std::collections::HashSet;

use once_cell::sync::Lazy;
use sha2::{Digest, Sha256};

const STOPWORDS_FILE: &str = include_str!("../config/stopwords.txt");

static STOPWORDS: Lazy<HashSet<String>> = Lazy::new(|| parse_word_list(STOPWORDS_FILE));

/// Parses a one-entry-per-line list, skipping blanks and `#` comments.
pub fn parse_word_list(contents: &str) -> HashSet<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn stopwords() -> &'static HashSet<String> {
    &STOPWORDS
}

/// Collapses every run of Unicode whitespace into one ASCII space and trims.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace split, case folding, and trimming of leading/trailing
/// punctuation. Tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// [`tokenize`] with stopwords removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(t))
        .collect()
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}
