//! Claim-level detection and correction of factual errors in LLM responses.
//!
//! The crate covers the whole pipeline (sentence splitting, atomic claim
//! decomposition, checkworthiness, evidence retrieval and re-ranking, stance
//! detection, verdict aggregation, claim editing and response revision), the
//! benchmark data model, a per-subtask evaluation harness, and the workflow
//! logic behind the two-annotator annotation service.

pub mod annotation;
pub mod checkworthiness;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod prompts;
pub mod providers;
pub mod retrieval;
pub mod revision;
pub mod store;
pub mod text;
pub mod verification;

mod par;

pub use config::PipelineConfig;
pub use error::{Error, ProviderError, Result, ValidationError};
pub use model::{
    AtomicClaim, ClaimCategory, DocumentVerdict, EditKind, EditOperation, EvidenceItem,
    FactcheckDocument, ImportanceLevel, Reliability, SentenceUnit, Source, Stance,
    StanceLabelSpace, Verdict,
};
pub use pipeline::{Pipeline, PipelineInput};
pub use providers::ProviderSuite;
