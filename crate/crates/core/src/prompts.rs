//! Versioned prompt templates. Bodies live in `prompts/<id>.v<version>.txt`
//! and use `{{name}}` placeholders.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::providers::{CompletionParams, CompletionRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub version: u32,
    pub body: &'static str,
}

macro_rules! template {
    ($name:ident, $id:literal, $version:literal) => {
        pub const $name: PromptTemplate = PromptTemplate {
            id: $id,
            version: $version,
            body: include_str!(concat!("../prompts/", $id, ".v", $version, ".txt")),
        };
    };
}

template!(DECOMPOSE, "decompose", 1);
template!(SENTENCE_CHECKWORTHY, "sentence_checkworthy", 1);
template!(CLAIM_CATEGORY, "claim_category", 1);
template!(IMPORTANCE, "importance", 1);
template!(QUERIES, "queries", 1);
template!(STANCE_FOUR, "stance4", 1);
template!(STANCE_THREE, "stance3", 1);
template!(CORRECTION, "correction", 1);
template!(REVISE_NO_QUESTION, "revise_no_question", 1);
template!(REVISE_WITH_QUESTION, "revise_with_question", 1);

pub const CATALOG: [PromptTemplate; 10] = [
    DECOMPOSE,
    SENTENCE_CHECKWORTHY,
    CLAIM_CATEGORY,
    IMPORTANCE,
    QUERIES,
    STANCE_FOUR,
    STANCE_THREE,
    CORRECTION,
    REVISE_NO_QUESTION,
    REVISE_WITH_QUESTION,
];

/// Template id -> version, recorded in run metadata.
pub fn versions() -> BTreeMap<String, u32> {
    CATALOG.iter().map(|t| (t.id.to_string(), t.version)).collect()
}

impl PromptTemplate {
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.body;
        while let Some(start) = rest.find("{{") {
            let Some(end) = rest[start..].find("}}") else { break };
            let name = &rest[start + 2..start + end];
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &rest[start + end + 2..];
        }
        out
    }

    /// Fills every placeholder; a missing variable is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<CompletionRequest> {
        let map: BTreeMap<String, String> = vars.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut prompt = self.body.to_string();
        for name in self.placeholders() {
            let value = map
                .get(name)
                .ok_or_else(|| Error::InvalidInput(format!("template {} needs variable `{name}`", self.id)))?;
            prompt = prompt.replace(&format!("{{{{{name}}}}}"), value);
        }
        Ok(CompletionRequest {
            template: self.id.to_string(),
            version: self.version,
            vars: map,
            prompt,
            params: CompletionParams::default(),
        })
    }
}
