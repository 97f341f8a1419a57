//! Pipeline configuration, loaded from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{
    CacheConfig, CompletionProvider, DiskCache, EmbeddingProvider, FixtureCorpus, HttpNli, MockCompletion,
    MockEmbedding, MockNli, NliLabel, NliProvider, OpenAiCompletion, OpenAiEmbedding, ProviderSuite, RateLimiter,
    SearchProvider, SerperSearch,
};
use crate::retrieval::RetrievalOptions;
use crate::text::sha256_hex;
use crate::verification::VerificationOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionKind {
    Openai,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub kind: CompletionKind,
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    /// JSON Lines transcript replayed by the mock backend.
    pub transcript: Option<PathBuf>,
    /// Requests per second; unlimited when absent.
    pub qps: Option<f64>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            kind: CompletionKind::Mock,
            model: "gpt-3.5-turbo".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            transcript: None,
            qps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub kind: CompletionKind,
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    pub dim: usize,
    pub seed: u64,
    pub qps: Option<f64>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: CompletionKind::Mock,
            model: "text-embedding-3-small".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            dim: 64,
            seed: 0,
            qps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SearchKind {
    Serper,
    #[default]
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub kind: SearchKind,
    pub endpoint: String,
    pub api_key_env: String,
    /// Directory with `index.json` for the fixture backend.
    pub corpus: Option<PathBuf>,
    pub qps: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            kind: SearchKind::Fixture,
            endpoint: "https://google.serper.dev/search".into(),
            api_key_env: "SERPER_API_KEY".into(),
            corpus: None,
            qps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NliKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliConfig {
    pub kind: NliKind,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub qps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub completion: CompletionConfig,
    pub embedding: EmbeddingConfig,
    pub search: SearchConfig,
    pub nli: Option<NliConfig>,
    pub cache: CacheConfig,
    pub retrieval: RetrievalOptions,
    pub verification: VerificationOptions,
    /// Fail on recoverable problems (unresolved pronouns, unparseable
    /// classifier output) instead of degrading.
    pub strict: bool,
    pub max_parallel: usize,
    /// Also revise by prompting with the corrected claims, next to the
    /// deterministic merge.
    pub prompted_revision: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            completion: CompletionConfig::default(),
            embedding: EmbeddingConfig::default(),
            search: SearchConfig::default(),
            nli: None,
            cache: CacheConfig::default(),
            retrieval: RetrievalOptions::default(),
            verification: VerificationOptions::default(),
            strict: false,
            max_parallel: 4,
            prompted_revision: false,
        }
    }
}

fn limiter(qps: Option<f64>) -> Arc<RateLimiter> {
    Arc::new(RateLimiter::per_second(qps.unwrap_or(0.0)))
}

fn api_key(var: &str) -> Result<String> {
    std::env::var(var).map_err(|_| Error::Config(format!("environment variable {var} is not set")))
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a TOML file; relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.completion.transcript.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.search.corpus.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.cache.dir);
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let r = &self.retrieval;
        let v = &self.verification;
        let problems = [
            (r.window == 0, "retrieval.window must be positive"),
            (r.stride == 0 || r.stride > r.window, "retrieval.stride must be in 1..=window"),
            (!(0.0..=1.0).contains(&r.alpha), "retrieval.alpha must be in [0, 1]"),
            (r.k == 0, "retrieval.k must be positive"),
            (r.queries == 0, "retrieval.queries must be positive"),
            (!(0.0..=1.0).contains(&v.beta), "verification.beta must be in [0, 1]"),
            (self.max_parallel == 0, "max_parallel must be positive"),
        ];
        match problems.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::Config((*msg).to_string())),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes"))
    }

    /// Instantiates the configured backends.
    pub fn build_providers(&self) -> Result<ProviderSuite> {
        let completion: Arc<dyn CompletionProvider> = match self.completion.kind {
            CompletionKind::Mock => match &self.completion.transcript {
                Some(path) => Arc::new(MockCompletion::from_file(path)?),
                None => Arc::new(MockCompletion::new(Vec::new())),
            },
            CompletionKind::Openai => Arc::new(OpenAiCompletion::new(
                &self.completion.base_url,
                api_key(&self.completion.api_key_env)?,
                &self.completion.model,
                limiter(self.completion.qps),
            )),
        };
        let embedding: Arc<dyn EmbeddingProvider> = match self.embedding.kind {
            CompletionKind::Mock => Arc::new(MockEmbedding::new(self.embedding.dim, self.embedding.seed)),
            CompletionKind::Openai => Arc::new(OpenAiEmbedding::new(
                &self.embedding.base_url,
                api_key(&self.embedding.api_key_env)?,
                &self.embedding.model,
                limiter(self.embedding.qps),
            )),
        };
        let search: Arc<dyn SearchProvider> = match self.search.kind {
            SearchKind::Fixture => match &self.search.corpus {
                Some(dir) => Arc::new(FixtureCorpus::from_dir(dir)?),
                None => Arc::new(FixtureCorpus::new()),
            },
            SearchKind::Serper => Arc::new(SerperSearch::new(
                &self.search.endpoint,
                api_key(&self.search.api_key_env)?,
                limiter(self.search.qps),
            )),
        };
        let mut suite = ProviderSuite::new(completion, embedding, search);
        if let Some(nli) = &self.nli {
            let backend: Arc<dyn NliProvider> = match nli.kind {
                NliKind::Mock => Arc::new(MockNli::new(NliLabel::Neutral)),
                NliKind::Http => Arc::new(HttpNli::new(&nli.endpoint, limiter(nli.qps))),
            };
            suite = suite.with_nli(backend);
        }
        if self.cache.enabled {
            suite = suite.with_cache(Arc::new(DiskCache::from_config(&self.cache)?));
        }
        Ok(suite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.retrieval.window, 100);
        assert_eq!(cfg.retrieval.stride, 50);
        assert_eq!(cfg.retrieval.k, 5);
        assert_eq!(cfg.verification.beta, 0.5);
    }

    #[test]
    fn overrides_and_hash() {
        let cfg = PipelineConfig::from_toml_str(
            "strict = true\n[retrieval]\nalpha = 0.3\n[completion]\nkind = \"openai\"\nmodel = \"gpt-4\"\n",
        )
        .unwrap();
        assert!(cfg.strict);
        assert_eq!(cfg.retrieval.alpha, 0.3);
        assert_eq!(cfg.completion.kind, CompletionKind::Openai);
        assert_ne!(cfg.config_hash(), PipelineConfig::default().config_hash());
        assert_eq!(cfg.config_hash(), cfg.clone().config_hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml_str("[retrieval]\nstride = 0").is_err());
        assert!(PipelineConfig::from_toml_str("[retrieval]\nalpha = 1.5").is_err());
        assert!(PipelineConfig::from_toml_str("[completion]\nkind = \"bogus\"").is_err());
    }

    #[test]
    fn missing_api_key_is_config_error() {
        let mut cfg = PipelineConfig::default();
        cfg.completion.kind = CompletionKind::Openai;
        cfg.completion.api_key_env = "FACTCHECK_TEST_UNSET_KEY".into();
        assert!(matches!(cfg.build_providers(), Err(Error::Config(_))));
    }
}
