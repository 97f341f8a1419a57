//! Run provenance and on-disk run directories.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::model::FactcheckDocument;
use crate::pipeline::PipelineInput;
use crate::providers::ProviderSuite;
use crate::revision::RevisionRecord;
use crate::text::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub document_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub provider_ids: BTreeMap<String, String>,
    pub prompt_versions: BTreeMap<String, u32>,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub cache_hits: u64,
    pub degraded_paths: Vec<String>,
    #[serde(default)]
    pub failures: Vec<RunFailure>,
}

impl RunMetadata {
    /// Collects provenance at the end of a run.
    pub fn collect(
        config: &PipelineConfig,
        suite: &ProviderSuite,
        started_at: chrono::DateTime<chrono::Utc>,
        failures: Vec<RunFailure>,
    ) -> Self {
        let config_hash = config.config_hash();
        let stamp = started_at.format("%Y%m%dT%H%M%SZ");
        Self {
            run_id: format!("run-{stamp}-{}", &config_hash[..8]),
            provider_ids: suite.provider_ids(),
            prompt_versions: crate::prompts::versions(),
            config_hash,
            started_at: started_at.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            cache_hits: suite.stats.cache_hits(),
            degraded_paths: suite.stats.degraded_paths(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub document_id: String,
    pub claim_id: String,
    pub query: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub config: PipelineConfig,
    pub metadata: RunMetadata,
    pub inputs: Vec<PipelineInput>,
    pub documents: Vec<FactcheckDocument>,
    pub revisions: Vec<RevisionRecord>,
}

impl RunArtifacts {
    pub fn evidence_manifest(&self) -> Vec<EvidenceRecord> {
        self.documents
            .iter()
            .flat_map(|d| {
                d.claims().flat_map(move |c| {
                    c.evidence.iter().map(move |e| EvidenceRecord {
                        document_id: d.id.clone(),
                        claim_id: c.id.clone(),
                        query: e.query.clone(),
                        url: e.url.clone(),
                    })
                })
            })
            .collect()
    }
}

pub const MANIFEST: &str = "manifest.json";
const FILES: [&str; 7] = [
    "config.json",
    "metadata.json",
    "input.jsonl",
    "output.jsonl",
    "revisions.jsonl",
    "evidence_manifest.json",
    MANIFEST,
];

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes a run directory. Every file's SHA-256 goes into `manifest.json`.
pub fn persist_run(dir: impl AsRef<Path>, run: &RunArtifacts) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for doc in &run.documents {
        doc.validate_with_k(run.config.retrieval.k)?;
    }
    let files: Vec<(&str, String)> = vec![
        ("config.json", serde_json::to_string_pretty(&run.config)? + "\n"),
        ("metadata.json", serde_json::to_string_pretty(&run.metadata)? + "\n"),
        ("input.jsonl", jsonl(&run.inputs)?),
        ("output.jsonl", jsonl(&run.documents)?),
        ("revisions.jsonl", jsonl(&run.revisions)?),
        ("evidence_manifest.json", serde_json::to_string_pretty(&run.evidence_manifest())? + "\n"),
    ];
    let mut manifest = BTreeMap::new();
    for (name, contents) in &files {
        write_atomic(&dir.join(name), contents.as_bytes())?;
        manifest.insert(name.to_string(), sha256_hex(contents));
    }
    write_atomic(&dir.join(MANIFEST), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(dir.to_path_buf())
}

fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

/// Reads a run directory, rejecting any file whose checksum does not match
/// the manifest.
pub fn load_run(dir: impl AsRef<Path>) -> Result<RunArtifacts> {
    let dir = dir.as_ref();
    let manifest: BTreeMap<String, String> = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST))?)?;
    let mut contents = BTreeMap::new();
    for name in FILES.iter().filter(|f| **f != MANIFEST) {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path)?;
        if manifest.get(*name) != Some(&sha256_hex(&text)) {
            return Err(Error::Checksum { file: path });
        }
        contents.insert(*name, text);
    }
    Ok(RunArtifacts {
        config: serde_json::from_str(&contents["config.json"])?,
        metadata: serde_json::from_str(&contents["metadata.json"])?,
        inputs: read_jsonl(&contents["input.jsonl"])?,
        documents: read_jsonl(&contents["output.jsonl"])?,
        revisions: read_jsonl(&contents["revisions.jsonl"])?,
    })
}
