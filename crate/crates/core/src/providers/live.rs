//! HTTP-backed providers. Each shares a [`RateLimiter`] and retries
//! transport and rate-limit failures with jittered backoff.

use std::sync::Arc;
use std::time::Duration;

use once_cell::sync::Lazy;
use regex::Regex;
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{
    with_retry, CompletionProvider, CompletionRequest, EmbeddingProvider, NliLabel, NliProvider,
    ProviderResult, RateLimiter, RetryPolicy, SearchHit, SearchProvider,
};
use crate::error::ProviderError;

fn client(timeout: Duration) -> Client {
    Client::builder()
        .timeout(timeout)
        .user_agent(concat!("factcheck/", env!("CARGO_PKG_VERSION")))
        .build()
        .expect("http client builds")
}

fn classify_status(resp: Response) -> ProviderResult<Response> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let body = resp.text().unwrap_or_default();
    let msg = format!("{status}: {}", body.chars().take(300).collect::<String>());
    Err(match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => ProviderError::Auth(msg),
        StatusCode::TOO_MANY_REQUESTS => ProviderError::RateLimited(msg),
        s if s.is_server_error() => ProviderError::Transport(msg),
        _ => ProviderError::Malformed(msg),
    })
}

fn transport(e: reqwest::Error) -> ProviderError {
    ProviderError::Transport(e.to_string())
}

/// OpenAI-compatible `/chat/completions` client.
pub struct OpenAiCompletion {
    http: Client,
    base_url: String,
    api_key: String,
    model: String,
    limiter: Arc<RateLimiter>,
    retry: RetryPolicy,
}

impl OpenAiCompletion {
    pub fn new(base_url: &str, api_key: String, model: &str, limiter: Arc<RateLimiter>) -> Self {
        Self {
            http: client(Duration::from_secs(120)),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            limiter,
            retry: RetryPolicy::default(),
        }
    }
}

impl CompletionProvider for OpenAiCompletion {
    fn id(&self) -> String {
        format!("openai:{}", self.model)
    }

    fn complete(&self, req: &CompletionRequest) -> ProviderResult<String> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
        });
        with_retry(&self.retry, || {
            self.limiter.acquire();
            let resp = self
                .http
                .post(format!("{}/chat/completions", self.base_url))
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .map_err(transport)?;
            let v: Value = classify_status(resp)?.json().map_err(transport)?;
            v["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
        })
    }
}

/// OpenAI-compatible `/embeddings` client.
pub struct OpenAiEmbedding {
    http: Client,
    base_url: String,
    api_key: String,
    model: String,
    limiter: Arc<RateLimiter>,
    retry: RetryPolicy,
}

impl OpenAiEmbedding {
    pub fn new(base_url: &str, api_key: String, model: &str, limiter: Arc<RateLimiter>) -> Self {
        Self {
            http: client(Duration::from_secs(60)),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            limiter,
            retry: RetryPolicy::default(),
        }
    }
}

impl EmbeddingProvider for OpenAiEmbedding {
    fn id(&self) -> String {
        format!("openai-embedding:{}", self.model)
    }

    fn embed(&self, text: &str) -> ProviderResult<Vec<f32>> {
        let body = json!({"model": self.model, "input": text});
        with_retry(&self.retry, || {
            self.limiter.acquire();
            let resp = self
                .http
                .post(format!("{}/embeddings", self.base_url))
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .map_err(transport)?;
            let v: Value = classify_status(resp)?.json().map_err(transport)?;
            v["data"][0]["embedding"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_f64).map(|x| x as f32).collect())
                .ok_or_else(|| ProviderError::Malformed("missing data[0].embedding".into()))
        })
    }
}

/// Google results through the serper.dev API; pages fetched directly.
pub struct SerperSearch {
    http: Client,
    endpoint: String,
    api_key: String,
    limiter: Arc<RateLimiter>,
    retry: RetryPolicy,
}

impl SerperSearch {
    pub fn new(endpoint: &str, api_key: String, limiter: Arc<RateLimiter>) -> Self {
        Self {
            http: client(Duration::from_secs(30)),
            endpoint: endpoint.to_string(),
            api_key,
            limiter,
            retry: RetryPolicy::default(),
        }
    }
}

impl SearchProvider for SerperSearch {
    fn id(&self) -> String {
        "serper".into()
    }

    fn search(&self, query: &str, max_results: usize) -> ProviderResult<Vec<SearchHit>> {
        let body = json!({"q": query, "num": max_results});
        with_retry(&self.retry, || {
            self.limiter.acquire();
            let resp = self
                .http
                .post(&self.endpoint)
                .header("X-API-KEY", &self.api_key)
                .json(&body)
                .send()
                .map_err(transport)?;
            let v: Value = classify_status(resp)?.json().map_err(transport)?;
            let organic = v["organic"].as_array().cloned().unwrap_or_default();
            Ok(organic
                .iter()
                .filter_map(|item| {
                    Some(SearchHit {
                        url: item["link"].as_str()?.to_string(),
                        title: item["title"].as_str().unwrap_or_default().to_string(),
                        snippet: item["snippet"].as_str().unwrap_or_default().to_string(),
                    })
                })
                .take(max_results)
                .collect())
        })
    }

    fn fetch(&self, url: &str) -> ProviderResult<String> {
        with_retry(&self.retry, || {
            self.limiter.acquire();
            let resp = self.http.get(url).send().map_err(transport)?;
            let resp = classify_status(resp)?;
            let is_html = resp
                .headers()
                .get(reqwest::header::CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .is_none_or(|ct| ct.contains("html"));
            let body = resp.text().map_err(transport)?;
            Ok(if is_html { html_to_text(&body) } else { body })
        })
    }
}

/// NLI service speaking `POST {premise, hypothesis} -> {label}`.
pub struct HttpNli {
    http: Client,
    endpoint: String,
    limiter: Arc<RateLimiter>,
    retry: RetryPolicy,
}

impl HttpNli {
    pub fn new(endpoint: &str, limiter: Arc<RateLimiter>) -> Self {
        Self { http: client(Duration::from_secs(30)), endpoint: endpoint.to_string(), limiter, retry: RetryPolicy::default() }
    }
}

impl NliProvider for HttpNli {
    fn id(&self) -> String {
        format!("http-nli:{}", self.endpoint)
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> ProviderResult<NliLabel> {
        let body = json!({"premise": premise, "hypothesis": hypothesis});
        with_retry(&self.retry, || {
            self.limiter.acquire();
            let resp = self.http.post(&self.endpoint).json(&body).send().map_err(transport)?;
            let v: Value = classify_status(resp)?.json().map_err(transport)?;
            serde_json::from_value(v["label"].clone())
                .map_err(|e| ProviderError::Malformed(format!("bad nli label: {e}")))
        })
    }
}

static DROP_BLOCKS: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?is)<(script|style|noscript|head)\b.*?</(script|style|noscript|head)\s*>").unwrap());
static COMMENTS: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static BLOCK_TAGS: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)</?(p|div|br|li|ul|ol|h[1-6]|tr|table|section|article|header|footer|blockquote|pre|dd|dt)\b[^>]*>")
        .unwrap()
});
static ANY_TAG: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static ENTITY: Lazy<Regex> = Lazy::new(|| Regex::new(r"&(#x[0-9a-fA-F]+|#[0-9]+|[a-zA-Z]+);").unwrap());
static SPACES: Lazy<Regex> = Lazy::new(|| Regex::new(r"[ \t\r\f\v]+").unwrap());
static BLANK_LINES: Lazy<Regex> = Lazy::new(|| Regex::new(r"\n\s*\n+").unwrap());

/// Coarse HTML to plain text: script/style dropped, block elements become
/// newlines, remaining tags stripped, common entities decoded.
pub fn html_to_text(html: &str) -> String {
    let s = DROP_BLOCKS.replace_all(html, " ");
    let s = COMMENTS.replace_all(&s, " ");
    let s = BLOCK_TAGS.replace_all(&s, "\n");
    let s = ANY_TAG.replace_all(&s, "");
    let s = ENTITY.replace_all(&s, |caps: &regex::Captures| decode_entity(&caps[1]).unwrap_or_else(|| caps[0].to_string()));
    let s = SPACES.replace_all(&s, " ");
    let s = BLANK_LINES.replace_all(&s, "\n");
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n")
}

fn decode_entity(name: &str) -> Option<String> {
    if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
        return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32).map(String::from);
    }
    if let Some(dec) = name.strip_prefix('#') {
        return dec.parse().ok().and_then(char::from_u32).map(String::from);
    }
    Some(
        match name {
            "amp" => "&",
            "lt" => "<",
            "gt" => ">",
            "quot" => "\"",
            "apos" => "'",
            "nbsp" => " ",
            "ndash" => "\u{2013}",
            "mdash" => "\u{2014}",
            _ => return None,
        }
        .to_string(),
    )
}
