//! Query generation, passage chunking, hybrid re-ranking and evidence
//! collection.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::EvidenceItem;
use crate::par::bounded_map;
use crate::prompts;
use crate::providers::{cosine, CompletionProvider, ProviderSuite};
use crate::text::{content_tokens, normalize_whitespace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalOptions {
    /// Passage length in whitespace tokens.
    pub window: usize,
    pub stride: usize,
    /// Weight of the lexical score in the hybrid score.
    pub alpha: f64,
    /// Evidence items kept per claim.
    pub k: usize,
    /// Maximum queries per claim, the verbatim claim included.
    pub queries: usize,
    pub results_per_query: usize,
    /// Set from the pipeline-wide limit.
    #[serde(skip)]
    pub max_parallel: usize,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self { window: 100, stride: 50, alpha: 0.5, k: 5, queries: 3, results_per_query: 5, max_parallel: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Verbatim,
    GeneratedQuestion,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub kind: QueryKind,
}

static LIST_PREFIX: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\s*(?:[-*\u{2022}]|\d{1,2}[.)]|q\d*:)\s*").unwrap());
static JSON_ITEM: Lazy<Regex> = Lazy::new(|| Regex::new(r#""((?:[^"\\]|\\.)*)""#).unwrap());

/// Reads queries from a JSON-style list if present, else one per line.
pub fn parse_queries(raw: &str) -> Vec<String> {
    let trimmed = raw.trim();
    let items: Vec<String> = if trimmed.starts_with('[') {
        JSON_ITEM
            .captures_iter(trimmed)
            .map(|c| serde_json::from_str::<String>(&format!("\"{}\"", &c[1])).unwrap_or_else(|_| c[1].to_string()))
            .collect()
    } else {
        trimmed
            .lines()
            .map(|l| LIST_PREFIX.replace(l, "").trim().trim_matches('"').to_string())
            .collect()
    };
    items.into_iter().map(|q| normalize_whitespace(&q)).filter(|q| !q.is_empty()).collect()
}

fn query_kind(q: &str) -> QueryKind {
    if q.ends_with('?') {
        QueryKind::GeneratedQuestion
    } else {
        QueryKind::Entity
    }
}

/// Verbatim claim first, then up to `n - 1` distinct generated queries.
pub fn build_queries(claim: &str, generated: Vec<String>, n: usize) -> Vec<SearchQuery> {
    let verbatim = normalize_whitespace(claim);
    let mut seen: HashSet<String> = HashSet::from([verbatim.to_lowercase()]);
    let mut out = vec![SearchQuery { text: verbatim, kind: QueryKind::Verbatim }];
    for q in generated {
        if out.len() >= n.max(1) {
            break;
        }
        if seen.insert(q.to_lowercase()) {
            out.push(SearchQuery { kind: query_kind(&q), text: q });
        }
    }
    out
}

pub fn generate_queries(claim: &str, n: usize, provider: &dyn CompletionProvider) -> Result<Vec<SearchQuery>> {
    if n <= 1 {
        return Ok(build_queries(claim, Vec::new(), 1));
    }
    let wanted = (n - 1).to_string();
    let req = prompts::QUERIES.render(&[("n", &wanted), ("claim", claim)])?;
    let raw = provider.complete(&req)?;
    Ok(build_queries(claim, parse_queries(&raw), n))
}

/// A window of a fetched document; `start..end` are token offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub url: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Passage {
    pub fn overlaps(&self, other: &Passage) -> bool {
        self.url == other.url && self.start < other.end && other.start < self.end
    }
}

/// Sliding windows of `window` tokens every `stride` tokens. The last window
/// ends at the final token, so every token is covered.
pub fn chunk_passages(url: &str, text: &str, window: usize, stride: usize) -> Vec<Passage> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let window = window.max(1);
    let stride = stride.clamp(1, window);
    let mut out = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + window).min(tokens.len());
        out.push(Passage { url: url.to_string(), start, end, text: tokens[start..end].join(" ") });
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Token-overlap F1 between content-token bags.
pub fn lexical_score(claim: &str, passage: &str) -> f64 {
    let a = content_tokens(claim);
    let b = content_tokens(passage);
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &b {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / b.len() as f64;
    let r = common as f64 / a.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    pub passage: Passage,
    /// Query that surfaced the passage's document.
    pub query: String,
    pub lexical: f64,
    pub semantic: f64,
    pub hybrid: f64,
}

fn rank_order(a: &ScoredPassage, b: &ScoredPassage) -> Ordering {
    b.hybrid
        .total_cmp(&a.hybrid)
        .then(b.lexical.total_cmp(&a.lexical))
        .then_with(|| a.passage.url.cmp(&b.passage.url))
        .then(a.passage.start.cmp(&b.passage.start))
}

/// Scores passages against the claim and keeps the best `k`, one per
/// overlapping span of a document. With `semantic = None` the lexical score
/// alone is used.
pub fn rerank(
    claim: &str,
    candidates: Vec<(Passage, String)>,
    semantic: Option<&[f64]>,
    alpha: f64,
    k: usize,
) -> Vec<ScoredPassage> {
    let alpha = if semantic.is_some() { alpha } else { 1.0 };
    let mut scored: Vec<ScoredPassage> = candidates
        .into_iter()
        .enumerate()
        .map(|(i, (passage, query))| {
            let lexical = lexical_score(claim, &passage.text);
            let semantic = semantic.map_or(0.0, |s| s[i]);
            ScoredPassage { hybrid: alpha * lexical + (1.0 - alpha) * semantic, passage, query, lexical, semantic }
        })
        .collect();
    scored.sort_by(rank_order);
    let mut kept: Vec<ScoredPassage> = Vec::new();
    for cand in scored {
        if kept.len() == k {
            break;
        }
        if !kept.iter().any(|p| p.passage.overlaps(&cand.passage)) {
            kept.push(cand);
        }
    }
    kept
}

/// Searches every query, fetches and chunks the hits, and returns the top
/// re-ranked passages against the claim.
pub fn retrieve(
    claim: &str,
    queries: &[SearchQuery],
    suite: &ProviderSuite,
    opts: &RetrievalOptions,
) -> Result<Vec<ScoredPassage>> {
    let mut docs: Vec<(String, String, String)> = Vec::new();
    let mut seen = HashSet::new();
    for q in queries {
        for hit in suite.search.search(&q.text, opts.results_per_query)? {
            if seen.insert(hit.url.clone()) {
                docs.push((q.text.clone(), hit.url, hit.snippet));
            }
        }
    }
    let fetched = bounded_map(&docs, opts.max_parallel, |(_, url, _)| suite.search.fetch(url));
    let mut candidates = Vec::new();
    for ((query, url, snippet), body) in docs.into_iter().zip(fetched) {
        let text = match body {
            Ok(t) if !t.trim().is_empty() => t,
            Ok(_) | Err(_) => {
                suite.stats.record_degraded(format!("retrieval: fetch failed for {url}, using search snippet"));
                snippet
            }
        };
        for p in chunk_passages(&url, &text, opts.window, opts.stride) {
            candidates.push((p, query.clone()));
        }
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    let semantic = if opts.alpha < 1.0 {
        let texts: Vec<&str> = std::iter::once(claim).chain(candidates.iter().map(|(p, _)| p.text.as_str())).collect();
        let vectors = bounded_map(&texts, opts.max_parallel, |t| suite.embedding.embed(t));
        match vectors.into_iter().collect::<std::result::Result<Vec<_>, _>>() {
            Ok(v) => Some(v[1..].iter().map(|p| (cosine(&v[0], p) + 1.0) / 2.0).collect::<Vec<f64>>()),
            Err(e) => {
                suite.stats.record_degraded(format!("rerank: embedding unavailable ({e}), lexical only"));
                None
            }
        }
    } else {
        None
    };
    Ok(rerank(claim, candidates, semantic.as_deref(), opts.alpha, opts.k))
}

/// Top-k evidence items for one claim, with unassessed stance.
pub fn collect_evidence(
    claim: &str,
    queries: &[SearchQuery],
    suite: &ProviderSuite,
    opts: &RetrievalOptions,
) -> Result<Vec<EvidenceItem>> {
    Ok(retrieve(claim, queries, suite, opts)?
        .into_iter()
        .map(|s| EvidenceItem::new(s.query, s.passage.url, s.passage.text))
        .collect())
}
