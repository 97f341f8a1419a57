//! End-to-end fact-checking of one response: decompose, classify, retrieve,
//! verify, correct and revise.

use serde::{Deserialize, Serialize};

use crate::checkworthiness::{classify_claim, classify_sentence, rank_importance, sentence_importance, ClaimLabel};
use crate::config::PipelineConfig;
use crate::decomposition::{check_decontextualization, decompose_with, DecomposeOptions, SentenceSplitter};
use crate::error::{Error, Result};
use crate::model::{
    AtomicClaim, ClaimCategory, FactcheckDocument, ImportanceLevel, SentenceUnit, Source, StanceLabelSpace, Verdict,
};
use crate::par::bounded_map;
use crate::providers::ProviderSuite;
use crate::retrieval::{build_queries, collect_evidence, generate_queries, RetrievalOptions};
use crate::revision::{correct_claim, merge_response, revise_response_llm, RevisionRecord};
use crate::verification::{classify_stance, nli_stance, verify_claim, StanceLabel, VerdictDecision};

/// One (question, response) pair to check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineInput {
    pub id: String,
    #[serde(default)]
    pub question: String,
    pub response: String,
    #[serde(default = "default_source")]
    pub source: Source,
}

fn default_source() -> Source {
    Source::Other
}

impl PipelineInput {
    pub fn new(id: impl Into<String>, question: impl Into<String>, response: impl Into<String>) -> Self {
        Self { id: id.into(), question: question.into(), response: response.into(), source: Source::Other }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub document: FactcheckDocument,
    pub revision: RevisionRecord,
}

pub struct Pipeline {
    config: PipelineConfig,
    suite: ProviderSuite,
    splitter: SentenceSplitter,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, suite: ProviderSuite) -> Self {
        Self { config, suite, splitter: SentenceSplitter::default() }
    }

    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let suite = config.build_providers()?;
        Ok(Self::new(config, suite))
    }

    pub fn with_splitter(mut self, splitter: SentenceSplitter) -> Self {
        self.splitter = splitter;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn suite(&self) -> &ProviderSuite {
        &self.suite
    }

    fn retrieval_options(&self) -> RetrievalOptions {
        RetrievalOptions { max_parallel: self.config.max_parallel, ..self.config.retrieval.clone() }
    }

    /// Runs `f`, replacing a classifier parse failure with `fallback`
    /// unless in strict mode.
    fn lenient<T>(&self, what: &str, r: Result<T>, fallback: T) -> Result<T> {
        match r {
            Err(Error::Classification { raw }) if !self.config.strict => {
                self.suite.stats.record_degraded(format!("{what}: unparseable output, using default"));
                log::warn!("{what}: unparseable classifier output {raw:?}");
                Ok(fallback)
            }
            other => other,
        }
    }

    pub fn check_sentence(&self, sentence: &str) -> Result<bool> {
        let r = classify_sentence(sentence, self.suite.completion.as_ref());
        self.lenient("sentence checkworthiness", r, true)
    }

    /// Claim category. Commonsense factual claims count as factual, except
    /// in strict mode where they are `other`.
    pub fn categorize_claim(&self, claim: &str) -> Result<ClaimCategory> {
        let r = classify_claim(claim, self.suite.completion.as_ref());
        let label = self.lenient("claim category", r, ClaimLabel::new(ClaimCategory::Factual))?;
        Ok(if label.commonsense && self.config.strict { ClaimCategory::Other } else { label.category })
    }

    pub fn stance(&self, claim: &str, evidence: &str, space: StanceLabelSpace) -> Result<StanceLabel> {
        match (&self.suite.nli, self.config.verification.use_nli) {
            (Some(nli), true) => Ok(nli_stance(nli.nli(evidence, claim)?, space)),
            _ => classify_stance(claim, evidence, space, self.suite.completion.as_ref()),
        }
    }

    /// Fills `claim.evidence` with the top-k retrieved passages.
    pub fn retrieve_evidence(&self, claim: &mut AtomicClaim) -> Result<()> {
        let opts = self.retrieval_options();
        let queries = match generate_queries(&claim.text, opts.queries, self.suite.completion.as_ref()) {
            Ok(q) => q,
            Err(Error::Provider(e)) if !self.config.strict && !e.is_retryable() => {
                self.suite.stats.record_degraded(format!("retrieval: query generation failed ({e}), verbatim only"));
                build_queries(&claim.text, Vec::new(), 1)
            }
            Err(e) => return Err(e),
        };
        claim.evidence = collect_evidence(&claim.text, &queries, &self.suite, &opts)?;
        Ok(())
    }

    /// Retrieves evidence when the claim has none, then judges it.
    pub fn verify(&self, claim: &mut AtomicClaim) -> Result<VerdictDecision> {
        if claim.evidence.is_empty() {
            self.retrieve_evidence(claim)?;
        }
        verify_claim(claim, &self.suite, &self.config.verification, self.config.strict)
    }

    /// Sentences with decomposed claims, checkworthiness, categories and
    /// importance; no retrieval.
    pub fn decompose_and_classify(&self, input: &PipelineInput) -> Result<Vec<SentenceUnit>> {
        let decomposition = decompose_with(
            &input.response,
            self.suite.completion.as_ref(),
            &self.splitter,
            DecomposeOptions { max_parallel: self.config.max_parallel },
        )?;
        let mut sentences = Vec::new();
        let mut claim_no = 0;
        for (i, sc) in decomposition.sentence_claims.into_iter().enumerate() {
            let mut unit = SentenceUnit::new(format!("s{}", i + 1), sc.sentence);
            if !self.check_sentence(&unit.text)? {
                unit.checkworthy = false;
                unit.category = match self.categorize_claim(&unit.text)? {
                    ClaimCategory::Factual => ClaimCategory::Other,
                    c => c,
                };
                sentences.push(unit);
                continue;
            }
            for text in sc.claims {
                claim_no += 1;
                if self.config.strict {
                    let flagged = check_decontextualization(&text);
                    if !flagged.is_empty() {
                        return Err(Error::Strict(format!(
                            "claim {text:?} has unresolved references: {}",
                            flagged.join(", ")
                        )));
                    }
                }
                let mut claim = AtomicClaim::new(format!("c{claim_no}"), text);
                claim.category = self.categorize_claim(&claim.text)?;
                let importance =
                    rank_importance(&input.question, &input.response, &claim.text, self.suite.completion.as_ref());
                claim.importance = match importance {
                    Err(Error::Provider(e)) if !e.is_retryable() && !self.config.strict => {
                        self.suite.stats.record_degraded(format!("importance: {e}, using intermediate"));
                        ImportanceLevel::Intermediate
                    }
                    r => self.lenient("importance", r, ImportanceLevel::Intermediate)?,
                };
                unit.claims.push(claim);
            }
            unit.importance = sentence_importance(unit.claims.iter().map(|c| c.importance));
            sentences.push(unit);
        }
        Ok(sentences)
    }

    pub fn run(&self, input: &PipelineInput) -> Result<PipelineOutput> {
        let mut doc = FactcheckDocument::new(input.id.clone(), input.question.clone(), input.response.clone());
        doc.source = input.source;
        doc.sentences = self.decompose_and_classify(input)?;

        let positions: Vec<(usize, usize)> = doc
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(si, s)| {
                s.claims.iter().enumerate().filter(|(_, c)| c.is_checkworthy()).map(move |(ci, _)| (si, ci))
            })
            .collect();
        let checked = bounded_map(&positions, self.config.max_parallel, |&(si, ci)| -> Result<AtomicClaim> {
            let mut claim = doc.sentences[si].claims[ci].clone();
            self.verify(&mut claim)?;
            if claim.verdict == Verdict::False {
                correct_claim(&mut claim, self.suite.completion.as_ref(), &self.suite.stats)?;
            }
            Ok(claim)
        });
        for (&(si, ci), claim) in positions.iter().zip(checked) {
            doc.sentences[si].claims[ci] = claim?;
        }

        let merged = merge_response(&doc);
        if doc.has_changes() {
            doc.revised_response = Some(merged.clone());
        }
        doc.document_verdict = Some(doc.derive_verdict());
        let prompted = if self.config.prompted_revision && doc.has_changes() {
            Some(revise_response_llm(&doc, self.suite.completion.as_ref())?)
        } else {
            None
        };
        doc.validate_with_k(self.config.retrieval.k)?;
        let revision = RevisionRecord::new(&doc, merged, prompted);
        Ok(PipelineOutput { document: doc, revision })
    }

    /// Runs documents one after another; claims within a document are
    /// checked in parallel.
    pub fn run_batch(&self, inputs: &[PipelineInput]) -> Vec<Result<PipelineOutput>> {
        inputs.iter().map(|i| self.run(i)).collect()
    }
}
