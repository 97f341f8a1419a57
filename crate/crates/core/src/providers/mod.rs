//! Pluggable completion, embedding, search and NLI backends.
//!
//! Every backend exposes a stable `id()` that is recorded in run metadata
//! and namespaces the on-disk cache.

mod cache;
mod fixture;
mod live;
mod mock;
mod retry;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

pub use cache::{CacheConfig, CachedCompletion, CachedEmbedding, CachedNli, CachedSearch, DiskCache};
pub use fixture::{FixtureCorpus, FixtureIndex};
pub use live::{html_to_text, HttpNli, OpenAiCompletion, OpenAiEmbedding, SerperSearch};
pub use mock::{MockCompletion, MockEmbedding, MockNli, TranscriptEntry};
pub use retry::{with_retry, RateLimiter, RetryPolicy};

use crate::error::ProviderError;

pub type ProviderResult<T> = std::result::Result<T, ProviderError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f32,
    pub max_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 1024 }
    }
}

/// A rendered prompt together with the template it came from, so mocks can
/// route on template id and variables and caches can key on the version.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub template: String,
    pub version: u32,
    pub vars: BTreeMap<String, String>,
    pub prompt: String,
    pub params: CompletionParams,
}

impl CompletionRequest {
    pub fn raw(prompt: impl Into<String>) -> Self {
        Self {
            template: "raw".into(),
            version: 0,
            vars: BTreeMap::new(),
            prompt: prompt.into(),
            params: CompletionParams::default(),
        }
    }

    pub fn var(&self, name: &str) -> Option<&str> {
        self.vars.get(name).map(String::as_str)
    }

    pub fn digest(&self) -> String {
        crate::text::sha256_hex(&self.prompt)
    }
}

pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> ProviderResult<String>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> ProviderResult<Vec<f32>>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    pub title: String,
    pub snippet: String,
}

pub trait SearchProvider: Send + Sync {
    fn id(&self) -> String;
    fn search(&self, query: &str, max_results: usize) -> ProviderResult<Vec<SearchHit>>;
    fn fetch(&self, url: &str) -> ProviderResult<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

pub trait NliProvider: Send + Sync {
    fn id(&self) -> String;
    fn nli(&self, premise: &str, hypothesis: &str) -> ProviderResult<NliLabel>;
}

/// Counters shared by every provider wrapper of one run.
#[derive(Debug, Default)]
pub struct RunStats {
    cache_hits: AtomicU64,
    degraded: Mutex<Vec<String>>,
}

impl RunStats {
    pub fn record_cache_hit(&self) {
        self.cache_hits.fetch_add(1, Ordering::Relaxed);
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn record_degraded(&self, note: impl Into<String>) {
        let note = note.into();
        log::warn!("degraded path: {note}");
        self.degraded.lock().push(note);
    }

    /// Degraded-path notes, sorted so concurrent runs report identically.
    pub fn degraded_paths(&self) -> Vec<String> {
        let mut notes = self.degraded.lock().clone();
        notes.sort();
        notes
    }
}

#[derive(Clone)]
pub struct ProviderSuite {
    pub completion: Arc<dyn CompletionProvider>,
    pub embedding: Arc<dyn EmbeddingProvider>,
    pub search: Arc<dyn SearchProvider>,
    pub nli: Option<Arc<dyn NliProvider>>,
    pub stats: Arc<RunStats>,
}

impl ProviderSuite {
    pub fn new(
        completion: Arc<dyn CompletionProvider>,
        embedding: Arc<dyn EmbeddingProvider>,
        search: Arc<dyn SearchProvider>,
    ) -> Self {
        Self { completion, embedding, search, nli: None, stats: Arc::new(RunStats::default()) }
    }

    pub fn with_nli(mut self, nli: Arc<dyn NliProvider>) -> Self {
        self.nli = Some(nli);
        self
    }

    /// Wraps every backend in the on-disk cache. Outputs are unchanged; only
    /// latency and the hit counter differ.
    pub fn with_cache(mut self, cache: Arc<DiskCache>) -> Self {
        self.completion = Arc::new(CachedCompletion::new(self.completion, cache.clone(), self.stats.clone()));
        self.embedding = Arc::new(CachedEmbedding::new(self.embedding, cache.clone(), self.stats.clone()));
        self.search = Arc::new(CachedSearch::new(self.search, cache.clone(), self.stats.clone()));
        if let Some(nli) = self.nli.take() {
            self.nli = Some(Arc::new(CachedNli::new(nli, cache, self.stats.clone())));
        }
        self
    }

    pub fn provider_ids(&self) -> BTreeMap<String, String> {
        let mut ids = BTreeMap::new();
        ids.insert("completion".to_string(), self.completion.id());
        ids.insert("embedding".to_string(), self.embedding.id());
        ids.insert("search".to_string(), self.search.id());
        if let Some(nli) = &self.nli {
            ids.insert("nli".to_string(), nli.id());
        }
        ids
    }
}

/// Cosine similarity; zero vectors and length mismatches give 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    }
}
