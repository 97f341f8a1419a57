//! Deterministic synthetic inputs for the criterion benchmarks.

use factcheck_core::model::Reliability;
use factcheck_core::verification::{StanceJudgement, StanceLabel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const WORDS: &[&str] = &[
    "court", "justice", "served", "until", "retirement", "born", "october", "the", "supreme", "oldest", "in",
    "was", "and", "from", "president", "united", "states", "capital", "river", "city", "population", "year",
];

/// `n` space-separated tokens drawn from a fixed vocabulary.
pub fn synthetic_text(n: usize, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// `n` stance judgements cycling through every stance and reliability.
pub fn synthetic_judgements(n: usize, seed: u64) -> Vec<StanceJudgement> {
    let mut rng = StdRng::seed_from_u64(seed);
    let stances = StanceLabel::FOUR;
    let rel = [Reliability::Reliable, Reliability::Unknown, Reliability::Unreliable];
    (0..n)
        .map(|_| StanceJudgement {
            stance: stances[rng.gen_range(0..stances.len())],
            reliability: rel[rng.gen_range(0..rel.len())],
        })
        .collect()
}
