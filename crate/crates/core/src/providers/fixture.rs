use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ProviderResult, SearchHit, SearchProvider};
use crate::error::{ProviderError, Result};
use crate::text::normalize_whitespace;

/// On-disk layout of an offline corpus: `index.json` next to one UTF-8 text
/// file per document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureIndex {
    /// url -> file name relative to the corpus directory.
    pub documents: BTreeMap<String, String>,
    /// query -> ranked url list.
    #[serde(default)]
    pub queries: BTreeMap<String, Vec<String>>,
    /// Returned for queries absent from `queries`.
    #[serde(default)]
    pub default_urls: Vec<String>,
}

/// Offline search backend over a fixed url -> text map.
#[derive(Debug, Clone, Default)]
pub struct FixtureCorpus {
    documents: BTreeMap<String, String>,
    queries: HashMap<String, Vec<String>>,
    default_urls: Vec<String>,
}

fn query_key(q: &str) -> String {
    normalize_whitespace(q).to_lowercase()
}

impl FixtureCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_document(mut self, url: impl Into<String>, text: impl Into<String>) -> Self {
        self.documents.insert(url.into(), text.into());
        self
    }

    pub fn with_query(mut self, query: &str, urls: &[&str]) -> Self {
        self.queries.insert(query_key(query), urls.iter().map(|u| u.to_string()).collect());
        self
    }

    pub fn with_default_urls(mut self, urls: &[&str]) -> Self {
        self.default_urls = urls.iter().map(|u| u.to_string()).collect();
        self
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index: FixtureIndex = serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
        let mut corpus = Self { default_urls: index.default_urls, ..Self::default() };
        for (url, file) in index.documents {
            corpus.documents.insert(url, std::fs::read_to_string(dir.join(file))?);
        }
        for (q, urls) in index.queries {
            corpus.queries.insert(query_key(&q), urls);
        }
        Ok(corpus)
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

impl SearchProvider for FixtureCorpus {
    fn id(&self) -> String {
        "fixture-corpus".into()
    }

    fn search(&self, query: &str, max_results: usize) -> ProviderResult<Vec<SearchHit>> {
        let urls = self.queries.get(&query_key(query)).unwrap_or(&self.default_urls);
        Ok(urls
            .iter()
            .filter_map(|url| {
                self.documents.get(url).map(|text| SearchHit {
                    url: url.clone(),
                    title: url.clone(),
                    snippet: text.chars().take(200).collect(),
                })
            })
            .take(max_results)
            .collect())
    }

    fn fetch(&self, url: &str) -> ProviderResult<String> {
        self.documents
            .get(url)
            .cloned()
            .ok_or_else(|| ProviderError::Transport(format!("fixture has no document for {url}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("canada.txt"), "Canada is a constitutional monarchy.").unwrap();
        let index = FixtureIndex {
            documents: BTreeMap::from([("https://example.org/canada".into(), "canada.txt".into())]),
            queries: BTreeMap::from([("Who is Canada's monarch?".into(), vec!["https://example.org/canada".into()])]),
            default_urls: vec![],
        };
        std::fs::write(dir.path().join("index.json"), serde_json::to_string(&index).unwrap()).unwrap();
        let corpus = FixtureCorpus::from_dir(dir.path()).unwrap();
        let hits = corpus.search("who is canada's   monarch?", 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(corpus.fetch(&hits[0].url).unwrap().contains("monarchy"));
        assert!(corpus.search("unrelated", 10).unwrap().is_empty());
    }
}
