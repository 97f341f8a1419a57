use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    CompletionProvider, CompletionRequest, EmbeddingProvider, NliLabel, NliProvider, ProviderResult,
    RunStats, SearchHit, SearchProvider,
};
use crate::text::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_cache_dir")]
    pub dir: PathBuf,
    /// Entries older than this are ignored. `None` keeps entries forever.
    #[serde(default)]
    pub ttl_secs: Option<u64>,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".factcheck-cache")
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self { enabled: false, dir: default_cache_dir(), ttl_secs: None }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    value: String,
    stored_at: u64,
}

/// Content-addressed cache: one JSON file per (namespace, key) digest.
/// Writes go to a temp file in the same directory and are renamed into place.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    ttl: Option<Duration>,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>, ttl: Option<Duration>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, ttl })
    }

    pub fn from_config(cfg: &CacheConfig) -> std::io::Result<Self> {
        Self::new(&cfg.dir, cfg.ttl_secs.map(Duration::from_secs))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, namespace: &str, key: &str) -> PathBuf {
        let ns: String = namespace
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.dir.join(ns).join(format!("{}.json", sha256_hex(format!("{namespace}\0{key}"))))
    }

    pub fn get(&self, namespace: &str, key: &str) -> Option<String> {
        let bytes = std::fs::read(self.path_for(namespace, key)).ok()?;
        let record: CacheRecord = serde_json::from_slice(&bytes).ok()?;
        if record.key != key {
            return None;
        }
        if let Some(ttl) = self.ttl {
            if now_secs().saturating_sub(record.stored_at) > ttl.as_secs() {
                return None;
            }
        }
        Some(record.value)
    }

    pub fn put(&self, namespace: &str, key: &str, value: &str) -> std::io::Result<()> {
        let path = self.path_for(namespace, key);
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent)?;
        let record = CacheRecord { key: key.to_string(), value: value.to_string(), stored_at: now_secs() };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(&serde_json::to_vec(&record)?)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn cached<T>(
    cache: &DiskCache,
    stats: &RunStats,
    namespace: &str,
    key: &str,
    decode: impl Fn(&str) -> Option<T>,
    encode: impl Fn(&T) -> String,
    call: impl FnOnce() -> ProviderResult<T>,
) -> ProviderResult<T> {
    if let Some(v) = cache.get(namespace, key).as_deref().and_then(&decode) {
        stats.record_cache_hit();
        return Ok(v);
    }
    let value = call()?;
    if let Err(e) = cache.put(namespace, key, &encode(&value)) {
        log::warn!("cache write failed for {namespace}: {e}");
    }
    Ok(value)
}

pub struct CachedCompletion {
    inner: Arc<dyn CompletionProvider>,
    cache: Arc<DiskCache>,
    stats: Arc<RunStats>,
}

impl CachedCompletion {
    pub fn new(inner: Arc<dyn CompletionProvider>, cache: Arc<DiskCache>, stats: Arc<RunStats>) -> Self {
        Self { inner, cache, stats }
    }
}

impl CompletionProvider for CachedCompletion {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, req: &CompletionRequest) -> ProviderResult<String> {
        // Template version is part of the key so prompt edits never replay
        // stale completions.
        let key = format!(
            "{}@v{}\n{}\n{}\n{}",
            req.template, req.version, req.params.temperature, req.params.max_tokens, req.prompt
        );
        cached(
            &self.cache,
            &self.stats,
            &self.inner.id(),
            &key,
            |s| Some(s.to_string()),
            |s| s.clone(),
            || self.inner.complete(req),
        )
    }
}

pub struct CachedEmbedding {
    inner: Arc<dyn EmbeddingProvider>,
    cache: Arc<DiskCache>,
    stats: Arc<RunStats>,
}

impl CachedEmbedding {
    pub fn new(inner: Arc<dyn EmbeddingProvider>, cache: Arc<DiskCache>, stats: Arc<RunStats>) -> Self {
        Self { inner, cache, stats }
    }
}

impl EmbeddingProvider for CachedEmbedding {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed(&self, text: &str) -> ProviderResult<Vec<f32>> {
        cached(
            &self.cache,
            &self.stats,
            &self.inner.id(),
            text,
            |s| serde_json::from_str(s).ok(),
            |v| serde_json::to_string(v).expect("vector serializes"),
            || self.inner.embed(text),
        )
    }
}

pub struct CachedSearch {
    inner: Arc<dyn SearchProvider>,
    cache: Arc<DiskCache>,
    stats: Arc<RunStats>,
}

impl CachedSearch {
    pub fn new(inner: Arc<dyn SearchProvider>, cache: Arc<DiskCache>, stats: Arc<RunStats>) -> Self {
        Self { inner, cache, stats }
    }
}

impl SearchProvider for CachedSearch {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn search(&self, query: &str, max_results: usize) -> ProviderResult<Vec<SearchHit>> {
        cached(
            &self.cache,
            &self.stats,
            &self.inner.id(),
            &format!("search\n{max_results}\n{query}"),
            |s| serde_json::from_str(s).ok(),
            |v| serde_json::to_string(v).expect("hits serialize"),
            || self.inner.search(query, max_results),
        )
    }

    fn fetch(&self, url: &str) -> ProviderResult<String> {
        cached(
            &self.cache,
            &self.stats,
            &self.inner.id(),
            &format!("fetch\n{url}"),
            |s| Some(s.to_string()),
            |s| s.clone(),
            || self.inner.fetch(url),
        )
    }
}

pub struct CachedNli {
    inner: Arc<dyn NliProvider>,
    cache: Arc<DiskCache>,
    stats: Arc<RunStats>,
}

impl CachedNli {
    pub fn new(inner: Arc<dyn NliProvider>, cache: Arc<DiskCache>, stats: Arc<RunStats>) -> Self {
        Self { inner, cache, stats }
    }
}

impl NliProvider for CachedNli {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> ProviderResult<NliLabel> {
        cached(
            &self.cache,
            &self.stats,
            &self.inner.id(),
            &format!("{premise}\0{hypothesis}"),
            |s| serde_json::from_str(s).ok(),
            |v| serde_json::to_string(v).expect("label serializes"),
            || self.inner.nli(premise, hypothesis),
        )
    }
}
