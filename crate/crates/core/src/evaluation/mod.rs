//! Benchmark evaluation: metrics, classification scores, FactScore and the
//! per-subtask harness.

pub mod classification;
pub mod factscore;
pub mod harness;
pub mod metrics;
pub mod tables;

pub use classification::{eval_classification, ClassificationReport, ConfusionMatrix, LabelConvention, LabelScores};
pub use factscore::{factscore, mean_factscore, select_data, Rejection, SelectionCriteria, SelectionDecision};
pub use harness::{
    run_benchmark, AlwaysCheckworthy, AlwaysFalse, AlwaysTrue, BenchmarkOptions, EvalReport, FactcheckerAdapter,
    PipelineAdapter, RandomAdapter, RevisionReport, SubprocessAdapter, Subtask, SubtaskOutcome,
};
pub use metrics::{edit_distance, embedding_cosine, ngram_distance, normalized_edit_distance, word_overlap};
