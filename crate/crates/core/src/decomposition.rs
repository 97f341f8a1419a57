//! Sentence splitting and atomic-claim decomposition.
//!
//! The whole response is sent once, seeded with its first sentence; the
//! completion is expected to continue sentence by sentence. Sentences the
//! completion skipped or re-split are decomposed again one at a time.

use std::collections::HashSet;
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::metrics::{ngram_distance, normalized_edit_distance, word_overlap};
use crate::par::bounded_map;
use crate::prompts;
use crate::providers::CompletionProvider;
use crate::text::{normalize_whitespace, parse_word_list};

const ABBREVIATIONS_FILE: &str = include_str!("../config/abbreviations.txt");

static DEFAULT_SPLITTER: Lazy<SentenceSplitter> = Lazy::new(SentenceSplitter::default);

/// Rule-based splitter: a token ending in `.`, `!` or `?` (optionally
/// followed by closing quotes/brackets) ends a sentence when the next token
/// starts with a capital letter, digit or quote, unless the token is a known
/// abbreviation, a dotted acronym, a single-letter initial after a
/// capitalized word, or a list marker.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self { abbreviations: parse_word_list(ABBREVIATIONS_FILE) }
    }
}

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']', '\u{bb}'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '[', '\u{ab}'];

static INITIAL: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\p{Lu}\.$").unwrap());
static ACRONYM: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(\p{L}\.){2,}$").unwrap());
static LIST_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\(?\d{1,3}[.)]$").unwrap());

impl SentenceSplitter {
    pub fn with_abbreviations(abbreviations: impl IntoIterator<Item = String>) -> Self {
        Self { abbreviations: abbreviations.into_iter().map(|a| a.to_lowercase()).collect() }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self { abbreviations: parse_word_list(&std::fs::read_to_string(path)?) })
    }

    pub fn split(&self, text: &str) -> Vec<String> {
        let tokens = tokens_with_breaks(text);
        let mut sentences = Vec::new();
        let mut current: Vec<&str> = Vec::new();
        for (i, &(token, newline_before)) in tokens.iter().enumerate() {
            current.push(token);
            let Some(&(next, _)) = tokens.get(i + 1) else { break };
            let prev = i.checked_sub(1).map(|j| tokens[j].0);
            if self.ends_sentence(token, newline_before, prev) && starts_sentence(next) {
                sentences.push(current.join(" "));
                current.clear();
            }
        }
        if !current.is_empty() {
            sentences.push(current.join(" "));
        }
        sentences
    }

    fn ends_sentence(&self, token: &str, newline_before: bool, prev: Option<&str>) -> bool {
        let stripped = token.trim_end_matches(CLOSERS);
        let Some(last) = stripped.chars().last() else { return false };
        if !matches!(last, '.' | '!' | '?') {
            return false;
        }
        if last != '.' || stripped.ends_with("..") {
            return true;
        }
        let core = stripped.trim_start_matches(OPENERS);
        if self.abbreviations.contains(&core.to_lowercase()) || ACRONYM.is_match(core) {
            return false;
        }
        // "William O. Douglas" but not "A is B. C is D."
        let name_context = prev.is_none_or(|p| p.trim_start_matches(OPENERS).starts_with(char::is_uppercase));
        if INITIAL.is_match(core) && name_context {
            return false;
        }
        let at_line_start = newline_before
            || prev.is_none_or(|p| p.trim_end_matches(CLOSERS).ends_with([':', '.', '!', '?']));
        !(at_line_start && LIST_MARKER.is_match(core))
    }
}

fn starts_sentence(token: &str) -> bool {
    if token.starts_with(OPENERS) && !token.starts_with('(') {
        return true;
    }
    token
        .trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

fn tokens_with_breaks(text: &str) -> Vec<(&str, bool)> {
    let mut out = Vec::new();
    let mut newline = false;
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((&text[s..i], newline));
                newline = false;
            }
            newline |= c == '\n';
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&text[s..], newline));
    }
    out
}

/// Splits with the bundled abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    DEFAULT_SPLITTER.split(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseMode {
    FullDocument,
    PerSentenceFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceClaims {
    pub sentence: String,
    pub claims: Vec<String>,
}

/// Claims per sentence, in response order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub sentence_claims: Vec<SentenceClaims>,
    pub parse_mode: ParseMode,
}

impl DecompositionResult {
    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.sentence_claims.iter().map(|s| s.sentence.as_str())
    }

    pub fn claims_for(&self, sentence: &str) -> Option<&[String]> {
        let key = normalize_whitespace(sentence);
        self.sentence_claims.iter().find(|s| s.sentence == key).map(|s| s.claims.as_slice())
    }
}

static SENTENCE_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)the sentence is\s*:").unwrap());
static FACTS_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)atomic facts for this sentence are\s*:").unwrap());
static QUOTED: Lazy<Regex> =
    Lazy::new(|| Regex::new(r#""((?:[^"\\]|\\.)*)"|\u{201c}([^\u{201d}]*)\u{201d}"#).unwrap());

/// One `The sentence is: … Atomic facts for this sentence are: [ … ]` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBlock {
    pub sentence: String,
    pub claims: Vec<String>,
}

/// Extracts the quoted strings of the first bracketed list. Commas between
/// items are optional.
fn parse_fact_list(segment: &str) -> Option<Vec<String>> {
    let open = segment.find('[')?;
    let body = &segment[open + 1..];
    let body = &body[..body.rfind(']').unwrap_or(body.len())];
    let claims: Vec<String> = QUOTED
        .captures_iter(body)
        .filter_map(|c| {
            if let Some(m) = c.get(1) {
                let raw = m.as_str();
                Some(serde_json::from_str::<String>(&format!("\"{raw}\"")).unwrap_or_else(|_| raw.to_string()))
            } else {
                c.get(2).map(|m| m.as_str().to_string())
            }
        })
        .map(|s| normalize_whitespace(&s))
        .filter(|s| !s.is_empty())
        .collect();
    Some(claims)
}

/// Parses a decomposition completion. Facts that precede the first
/// `The sentence is:` marker belong to `seed_sentence`, which the prompt
/// already supplied.
pub fn parse_decomposition(output: &str, seed_sentence: &str) -> Vec<ParsedBlock> {
    let mut blocks = Vec::new();
    let starts: Vec<(usize, usize)> = SENTENCE_MARKER.find_iter(output).map(|m| (m.start(), m.end())).collect();
    let head_end = starts.first().map_or(output.len(), |s| s.0);
    if let Some(claims) = parse_fact_list(&output[..head_end]) {
        if !claims.is_empty() {
            blocks.push(ParsedBlock { sentence: normalize_whitespace(seed_sentence), claims });
        }
    }
    for (i, &(_, body_start)) in starts.iter().enumerate() {
        let body_end = starts.get(i + 1).map_or(output.len(), |s| s.0);
        let segment = &output[body_start..body_end];
        let (sentence, rest) = match FACTS_MARKER.find(segment) {
            Some(m) => (&segment[..m.start()], &segment[m.end()..]),
            None => match segment.find('[') {
                Some(p) => (&segment[..p], &segment[p..]),
                None => (segment, ""),
            },
        };
        if let Some(claims) = parse_fact_list(rest) {
            if !claims.is_empty() {
                blocks.push(ParsedBlock { sentence: normalize_whitespace(sentence), claims });
            }
        }
    }
    blocks
}

fn match_key(s: &str) -> String {
    normalize_whitespace(s).trim_matches(|c: char| c == '"' || c.is_whitespace()).to_lowercase()
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    pub max_parallel: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { max_parallel: 4 }
    }
}

fn request_decomposition(provider: &dyn CompletionProvider, context: &str, sentence: &str) -> Result<String> {
    let req = prompts::DECOMPOSE.render(&[("context", context), ("sentence", sentence)])?;
    Ok(provider.complete(&req)?)
}

pub fn decompose_document(response: &str, provider: &dyn CompletionProvider) -> Result<DecompositionResult> {
    decompose_with(response, provider, &DEFAULT_SPLITTER, DecomposeOptions::default())
}

pub fn decompose_with(
    response: &str,
    provider: &dyn CompletionProvider,
    splitter: &SentenceSplitter,
    opts: DecomposeOptions,
) -> Result<DecompositionResult> {
    let sentences = splitter.split(response);
    if sentences.is_empty() {
        return Err(Error::InvalidInput("cannot decompose an empty response".into()));
    }
    let context = normalize_whitespace(response);
    let raw = request_decomposition(provider, &context, &sentences[0])?;
    let blocks = parse_decomposition(&raw, &sentences[0]);

    let mut assigned: Vec<Option<Vec<String>>> = vec![None; sentences.len()];
    let mut cursor = 0;
    for (i, sentence) in sentences.iter().enumerate() {
        let key = match_key(sentence);
        if let Some(offset) = blocks[cursor..].iter().position(|b| match_key(&b.sentence) == key) {
            assigned[i] = Some(blocks[cursor + offset].claims.clone());
            cursor += offset + 1;
        }
    }

    let missing: Vec<usize> = (0..sentences.len()).filter(|&i| assigned[i].is_none()).collect();
    let parse_mode = if missing.is_empty() { ParseMode::FullDocument } else { ParseMode::PerSentenceFallback };
    let recovered = bounded_map(&missing, opts.max_parallel, |&i| -> Result<Vec<String>> {
        let raw = request_decomposition(provider, &context, &sentences[i])?;
        parse_decomposition(&raw, &sentences[i])
            .into_iter()
            .next()
            .map(|b| b.claims)
            .ok_or_else(|| Error::Decomposition {
                message: format!("no atomic facts parsed for sentence {}", i + 1),
                raw,
            })
    });
    for (i, claims) in missing.into_iter().zip(recovered) {
        assigned[i] = Some(claims?);
    }

    Ok(DecompositionResult {
        sentence_claims: sentences
            .into_iter()
            .zip(assigned)
            .map(|(sentence, claims)| SentenceClaims { sentence, claims: claims.expect("every sentence assigned") })
            .collect(),
        parse_mode,
    })
}

const LINT_PRONOUNS: &[&str] = &["it", "they", "those", "these", "this", "that", "he", "she"];
const CLAUSE_OPENERS: &[&str] = &[
    "and", "but", "or", "so", "yet", "because", "although", "though", "while", "since", "when", "whereas", "if",
    "that", "which",
];
const FINITE_VERBS: &[&str] = &[
    "is", "was", "are", "were", "has", "had", "have", "does", "did", "do", "will", "would", "can", "could", "may",
    "might", "should", "must", "shall", "seems", "seem", "seemed", "adds", "add", "became", "becomes", "remains",
    "remained",
];

/// Flags unresolved pronouns in subject position: clause-initial
/// occurrences (text start, after punctuation or a conjunction) and
/// occurrences directly followed by a finite verb. Empty output passes.
pub fn check_decontextualization(claim: &str) -> Vec<String> {
    let raw: Vec<&str> = claim.split_whitespace().collect();
    let words: Vec<String> = raw
        .iter()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .collect();
    let mut flagged = Vec::new();
    for (i, word) in words.iter().enumerate() {
        if !LINT_PRONOUNS.contains(&word.as_str()) {
            continue;
        }
        let clause_start = i == 0
            || raw[i - 1].ends_with([',', ';', ':', '.', '!', '?'])
            || CLAUSE_OPENERS.contains(&words[i - 1].as_str());
        let before_verb = words.get(i + 1).is_some_and(|w| FINITE_VERBS.contains(&w.as_str()));
        if clause_start || before_verb {
            flagged.push(raw[i].trim_matches(|c: char| !c.is_alphanumeric()).to_string());
        }
    }
    flagged
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionAgreement {
    pub equal_count_sentences: usize,
    pub auto_more: usize,
    pub auto_fewer: usize,
    /// Claim pairs that entered the lexical means.
    pub paired_claims: usize,
    pub mean_normalized_edit_distance: f64,
    pub mean_ngram_distance: f64,
    pub mean_word_overlap: f64,
}

/// Compares a human and an automatic decomposition of the same sentences.
/// Lexical means are taken claim-wise over sentences with equal claim counts;
/// with no such pairs the means are 0, 0 and 1.
pub fn compare_decompositions(human: &DecompositionResult, auto: &DecompositionResult) -> Result<DecompositionAgreement> {
    let human_keys: Vec<String> = human.sentences().map(normalize_whitespace).collect();
    let auto_keys: Vec<String> = auto.sentences().map(normalize_whitespace).collect();
    let mut hs = human_keys.clone();
    let mut aset = auto_keys.clone();
    hs.sort();
    aset.sort();
    if hs != aset {
        return Err(Error::InvalidInput("decompositions cover different sentence sets".into()));
    }
    let mut agreement = DecompositionAgreement {
        equal_count_sentences: 0,
        auto_more: 0,
        auto_fewer: 0,
        paired_claims: 0,
        mean_normalized_edit_distance: 0.0,
        mean_ngram_distance: 0.0,
        mean_word_overlap: 0.0,
    };
    let mut used = vec![false; auto.sentence_claims.len()];
    for (h, key) in human.sentence_claims.iter().zip(&human_keys) {
        let j = (0..auto_keys.len())
            .find(|&j| !used[j] && &auto_keys[j] == key)
            .expect("sentence sets are equal");
        used[j] = true;
        let a = &auto.sentence_claims[j];
        match a.claims.len().cmp(&h.claims.len()) {
            std::cmp::Ordering::Greater => agreement.auto_more += 1,
            std::cmp::Ordering::Less => agreement.auto_fewer += 1,
            std::cmp::Ordering::Equal => {
                agreement.equal_count_sentences += 1;
                for (hc, ac) in h.claims.iter().zip(&a.claims) {
                    agreement.paired_claims += 1;
                    agreement.mean_normalized_edit_distance += normalized_edit_distance(hc, ac);
                    agreement.mean_ngram_distance += ngram_distance(hc, ac, 2);
                    agreement.mean_word_overlap += word_overlap(hc, ac);
                }
            }
        }
    }
    if agreement.paired_claims == 0 {
        agreement.mean_word_overlap = 1.0;
    } else {
        let n = agreement.paired_claims as f64;
        agreement.mean_normalized_edit_distance /= n;
        agreement.mean_ngram_distance /= n;
        agreement.mean_word_overlap /= n;
    }
    Ok(agreement)
}
