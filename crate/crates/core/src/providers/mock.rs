use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    CompletionProvider, CompletionRequest, EmbeddingProvider, NliLabel, NliProvider, ProviderResult,
};
use crate::error::{Error, ProviderError, Result};
use crate::text::{normalize_whitespace, tokenize};

/// One canned completion. An entry matches either by the SHA-256 digest of
/// the rendered prompt, or by template id plus equality on the listed
/// template variables (whitespace-normalized). Entries without `when` act as
/// per-template defaults; earlier entries win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, String>,
    pub response: String,
}

impl TranscriptEntry {
    pub fn for_template(template: &str, response: impl Into<String>) -> Self {
        Self { digest: None, template: Some(template.into()), when: BTreeMap::new(), response: response.into() }
    }

    pub fn when(mut self, var: &str, value: impl Into<String>) -> Self {
        self.when.insert(var.into(), value.into());
        self
    }

    fn matches(&self, req: &CompletionRequest, digest: &str) -> bool {
        if let Some(d) = &self.digest {
            return d == digest;
        }
        match &self.template {
            Some(t) if t == &req.template => self.when.iter().all(|(k, v)| {
                req.vars
                    .get(k)
                    .is_some_and(|actual| normalize_whitespace(actual) == normalize_whitespace(v))
            }),
            _ => false,
        }
    }
}

type Handler = Box<dyn Fn(&CompletionRequest) -> Option<String> + Send + Sync>;

/// Transcript-replay completion backend for hermetic runs.
pub struct MockCompletion {
    id: String,
    entries: Vec<TranscriptEntry>,
    handlers: Vec<Handler>,
    calls: AtomicU64,
}

impl MockCompletion {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self { id: "mock-completion".into(), entries, handlers: Vec::new(), calls: AtomicU64::new(0) }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Fallback consulted when no transcript entry matches.
    pub fn with_handler(
        mut self,
        f: impl Fn(&CompletionRequest) -> Option<String> + Send + Sync + 'static,
    ) -> Self {
        self.handlers.push(Box::new(f));
        self
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    /// Replies with the value of one template variable, e.g. echoing the
    /// original document back from a revision prompt.
    pub fn echo(var: &'static str) -> Self {
        Self::new(Vec::new()).with_id(format!("mock-echo-{var}")).with_handler(move |r| r.var(var).map(str::to_string))
    }

    /// Loads a JSON Lines transcript file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let contents = std::fs::read_to_string(path)?;
        let entries = contents
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(entries))
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl CompletionProvider for MockCompletion {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, req: &CompletionRequest) -> ProviderResult<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = req.digest();
        if let Some(entry) = self.entries.iter().find(|e| e.matches(req, &digest)) {
            return Ok(entry.response.clone());
        }
        self.handlers
            .iter()
            .find_map(|h| h(req))
            .ok_or(ProviderError::NoTranscript { template: req.template.clone(), digest })
    }
}

/// Seeded feature-hashing embedder: each token adds ±1 to a hashed bucket,
/// and the result is unit-normalized. Identical token bags embed identically.
pub struct MockEmbedding {
    dim: usize,
    seed: u64,
    overrides: HashMap<String, Vec<f32>>,
    calls: AtomicU64,
}

impl MockEmbedding {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed, overrides: HashMap::new(), calls: AtomicU64::new(0) }
    }

    /// Pins the vector returned for an exact text.
    pub fn with_vector(mut self, text: impl Into<String>, v: Vec<f32>) -> Self {
        self.overrides.insert(text.into(), v);
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Default for MockEmbedding {
    fn default() -> Self {
        Self::new(64, 0)
    }
}

impl EmbeddingProvider for MockEmbedding {
    fn id(&self) -> String {
        format!("mock-embedding-d{}-s{}", self.dim, self.seed)
    }

    fn embed(&self, text: &str) -> ProviderResult<Vec<f32>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(v) = self.overrides.get(text) {
            return Ok(v.clone());
        }
        let mut v = vec![0f32; self.dim];
        for token in tokenize(text) {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(token.as_bytes());
            let d = h.finalize();
            let bucket = u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) as usize % self.dim;
            v[bucket] += if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Scripted NLI backend: exact (premise, hypothesis) lookups with a default.
pub struct MockNli {
    rules: HashMap<(String, String), NliLabel>,
    default: NliLabel,
}

impl MockNli {
    pub fn new(default: NliLabel) -> Self {
        Self { rules: HashMap::new(), default }
    }

    pub fn with_rule(mut self, premise: &str, hypothesis: &str, label: NliLabel) -> Self {
        self.rules.insert((premise.to_string(), hypothesis.to_string()), label);
        self
    }
}

impl NliProvider for MockNli {
    fn id(&self) -> String {
        "mock-nli".into()
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> ProviderResult<NliLabel> {
        Ok(*self
            .rules
            .get(&(premise.to_string(), hypothesis.to_string()))
            .unwrap_or(&self.default))
    }
}
