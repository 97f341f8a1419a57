//! Stance detection and verdict aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AtomicClaim, Reliability, Stance, StanceLabelSpace, Verdict};
use crate::prompts;
use crate::providers::{CompletionProvider, NliLabel, ProviderSuite};

/// Stance as produced by a classifier. `Support` only occurs in the
/// three-label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StanceLabel {
    CompletelySupport,
    PartiallySupport,
    Support,
    Refute,
    Irrelevant,
}

impl StanceLabel {
    pub const FOUR: [StanceLabel; 4] =
        [Self::CompletelySupport, Self::PartiallySupport, Self::Refute, Self::Irrelevant];
    pub const THREE: [StanceLabel; 3] = [Self::Support, Self::Refute, Self::Irrelevant];

    pub fn labels(space: StanceLabelSpace) -> &'static [StanceLabel] {
        match space {
            StanceLabelSpace::FourLabel => &Self::FOUR,
            StanceLabelSpace::ThreeLabel => &Self::THREE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CompletelySupport => "completely-support",
            Self::PartiallySupport => "partially-support",
            Self::Support => "support",
            Self::Refute => "refute",
            Self::Irrelevant => "irrelevant",
        }
    }

    /// Stored form on an evidence item; a merged `Support` is stored as
    /// complete support.
    pub fn to_stance(self) -> Stance {
        match self {
            Self::CompletelySupport | Self::Support => Stance::CompletelySupport,
            Self::PartiallySupport => Stance::PartiallySupport,
            Self::Refute => Stance::Refute,
            Self::Irrelevant => Stance::Irrelevant,
        }
    }

    pub fn from_stance(stance: Stance) -> Option<Self> {
        match stance {
            Stance::CompletelySupport => Some(Self::CompletelySupport),
            Stance::PartiallySupport => Some(Self::PartiallySupport),
            Stance::Refute => Some(Self::Refute),
            Stance::Irrelevant => Some(Self::Irrelevant),
            Stance::Unassessed => None,
        }
    }

    pub fn in_space(self, space: StanceLabelSpace) -> Self {
        match space {
            StanceLabelSpace::FourLabel => self,
            StanceLabelSpace::ThreeLabel => merge_to_three_labels(self),
        }
    }
}

/// Collapses both support grades into `Support`.
pub fn merge_to_three_labels(label: StanceLabel) -> StanceLabel {
    match label {
        StanceLabel::CompletelySupport | StanceLabel::PartiallySupport | StanceLabel::Support => StanceLabel::Support,
        other => other,
    }
}

/// Reads the earliest stance marker in a classifier answer.
pub fn parse_stance(raw: &str, space: StanceLabelSpace) -> Result<StanceLabel> {
    let text = raw.to_lowercase();
    const MARKERS: &[(&str, StanceLabel)] = &[
        ("partial", StanceLabel::PartiallySupport),
        ("complete", StanceLabel::CompletelySupport),
        ("fully", StanceLabel::CompletelySupport),
        ("support", StanceLabel::CompletelySupport),
        ("refute", StanceLabel::Refute),
        ("contradict", StanceLabel::Refute),
        ("irrelevant", StanceLabel::Irrelevant),
        ("unrelated", StanceLabel::Irrelevant),
        ("not relevant", StanceLabel::Irrelevant),
    ];
    MARKERS
        .iter()
        .filter_map(|(m, l)| text.find(m).map(|p| (p, *l)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, l)| l.in_space(space))
        .ok_or_else(|| Error::Stance { raw: raw.to_string() })
}

pub fn nli_stance(label: NliLabel, space: StanceLabelSpace) -> StanceLabel {
    match label {
        NliLabel::Entailment => StanceLabel::CompletelySupport.in_space(space),
        NliLabel::Contradiction => StanceLabel::Refute,
        NliLabel::Neutral => StanceLabel::Irrelevant,
    }
}

pub fn classify_stance(
    claim: &str,
    evidence: &str,
    space: StanceLabelSpace,
    provider: &dyn CompletionProvider,
) -> Result<StanceLabel> {
    let template = match space {
        StanceLabelSpace::FourLabel => prompts::STANCE_FOUR,
        StanceLabelSpace::ThreeLabel => prompts::STANCE_THREE,
    };
    let req = template.render(&[("claim", claim), ("evidence", evidence)])?;
    parse_stance(&provider.complete(&req)?, space)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerdictWeights {
    pub reliable: f64,
    pub unknown: f64,
    pub unreliable: f64,
}

impl Default for VerdictWeights {
    fn default() -> Self {
        Self { reliable: 1.0, unknown: 0.5, unreliable: 0.1 }
    }
}

impl VerdictWeights {
    pub fn weight(&self, r: Reliability) -> f64 {
        match r {
            Reliability::Reliable => self.reliable,
            Reliability::Unknown => self.unknown,
            Reliability::Unreliable => self.unreliable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationOptions {
    pub label_space: StanceLabelSpace,
    /// Credit given to partial support.
    pub beta: f64,
    pub weights: VerdictWeights,
    /// Use the NLI backend, when configured, instead of the completion
    /// prompt.
    pub use_nli: bool,
}

impl Default for VerificationOptions {
    fn default() -> Self {
        Self {
            label_space: StanceLabelSpace::FourLabel,
            beta: 0.5,
            weights: VerdictWeights::default(),
            use_nli: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceJudgement {
    pub stance: StanceLabel,
    pub reliability: Reliability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictDecision {
    pub verdict: Verdict,
    pub support: f64,
    pub refute: f64,
}

/// Sums with a fixed order so that permuted inputs give identical totals.
fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Weighted vote over evidence stances. Irrelevant evidence is ignored;
/// partial support earns `beta`. Ties, including no relevant evidence, give
/// not-enough-evidence.
pub fn aggregate_verdict(judgements: &[StanceJudgement], opts: &VerificationOptions) -> VerdictDecision {
    let mut support = Vec::new();
    let mut refute = Vec::new();
    for j in judgements {
        let w = opts.weights.weight(j.reliability);
        match j.stance {
            StanceLabel::CompletelySupport | StanceLabel::Support => support.push(w),
            StanceLabel::PartiallySupport => support.push(opts.beta * w),
            StanceLabel::Refute => refute.push(w),
            StanceLabel::Irrelevant => {}
        }
    }
    let (s, r) = (stable_sum(support), stable_sum(refute));
    let eps = 1e-9 * (s + r).max(1.0);
    let verdict = if r - s > eps {
        Verdict::False
    } else if s - r > eps {
        Verdict::True
    } else {
        Verdict::NotEnoughEvidence
    };
    VerdictDecision { verdict, support: s, refute: r }
}

/// Judges every evidence item of the claim, stores the stances and the
/// verdict. An unparseable stance counts as irrelevant unless `strict`.
pub fn verify_claim(
    claim: &mut AtomicClaim,
    suite: &ProviderSuite,
    opts: &VerificationOptions,
    strict: bool,
) -> Result<VerdictDecision> {
    let mut judgements = Vec::with_capacity(claim.evidence.len());
    for (i, ev) in claim.evidence.iter_mut().enumerate() {
        let label = match (&suite.nli, opts.use_nli) {
            (Some(nli), true) => nli_stance(nli.nli(&ev.snippet, &claim.text)?, opts.label_space),
            _ => match classify_stance(&claim.text, &ev.snippet, opts.label_space, suite.completion.as_ref()) {
                Ok(l) => l,
                Err(Error::Stance { raw }) if !strict => {
                    suite.stats.record_degraded(format!(
                        "verification: unparseable stance for {} evidence {i} treated as irrelevant",
                        claim.id
                    ));
                    log::warn!("unparseable stance output: {raw:?}");
                    StanceLabel::Irrelevant
                }
                Err(e) => return Err(e),
            },
        };
        ev.stance = label.to_stance();
        judgements.push(StanceJudgement { stance: label, reliability: ev.reliability });
    }
    let decision = aggregate_verdict(&judgements, opts);
    claim.verdict = decision.verdict;
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(stance: StanceLabel, reliability: Reliability) -> StanceJudgement {
        StanceJudgement { stance, reliability }
    }

    #[test]
    fn stance_parsing() {
        use StanceLabel::*;
        let four = StanceLabelSpace::FourLabel;
        assert_eq!(parse_stance("Partially supports", four).unwrap(), PartiallySupport);
        assert_eq!(parse_stance("completely support", four).unwrap(), CompletelySupport);
        assert_eq!(parse_stance("Supports.", four).unwrap(), CompletelySupport);
        assert_eq!(parse_stance("refutes", four).unwrap(), Refute);
        assert_eq!(parse_stance("The evidence contradicts it", four).unwrap(), Refute);
        assert_eq!(parse_stance("Irrelevant", four).unwrap(), Irrelevant);
        assert_eq!(parse_stance("partially support", StanceLabelSpace::ThreeLabel).unwrap(), Support);
        assert!(matches!(parse_stance("???", four), Err(Error::Stance { .. })));
    }

    #[test]
    fn nli_mapping() {
        assert_eq!(nli_stance(NliLabel::Entailment, StanceLabelSpace::FourLabel), StanceLabel::CompletelySupport);
        assert_eq!(nli_stance(NliLabel::Entailment, StanceLabelSpace::ThreeLabel), StanceLabel::Support);
        assert_eq!(nli_stance(NliLabel::Contradiction, StanceLabelSpace::ThreeLabel), StanceLabel::Refute);
        assert_eq!(nli_stance(NliLabel::Neutral, StanceLabelSpace::FourLabel), StanceLabel::Irrelevant);
    }

    #[test]
    fn aggregation_cases() {
        use Reliability::*;
        use StanceLabel::*;
        let o = VerificationOptions::default();
        assert_eq!(aggregate_verdict(&[], &o).verdict, Verdict::NotEnoughEvidence);
        assert_eq!(aggregate_verdict(&[j(Irrelevant, Reliable)], &o).verdict, Verdict::NotEnoughEvidence);
        assert_eq!(aggregate_verdict(&[j(CompletelySupport, Unknown)], &o).verdict, Verdict::True);
        assert_eq!(aggregate_verdict(&[j(Refute, Unreliable)], &o).verdict, Verdict::False);
        // 0.5 * 1.0 partial vs 0.5 unknown refute: tie.
        let tie = aggregate_verdict(&[j(PartiallySupport, Reliable), j(Refute, Unknown)], &o);
        assert_eq!(tie.verdict, Verdict::NotEnoughEvidence);
        assert_eq!((tie.support, tie.refute), (0.5, 0.5));
        let d = aggregate_verdict(&[j(CompletelySupport, Reliable), j(Refute, Reliable), j(Refute, Unreliable)], &o);
        assert_eq!(d.verdict, Verdict::False);
        // Ten unreliable refutations only tie one reliable support.
        let mut many = vec![j(CompletelySupport, Reliable)];
        many.extend(std::iter::repeat(j(Refute, Unreliable)).take(10));
        assert_eq!(aggregate_verdict(&many, &o).verdict, Verdict::NotEnoughEvidence);
    }

    #[test]
    fn stored_stances() {
        assert_eq!(StanceLabel::Support.to_stance(), Stance::CompletelySupport);
        assert_eq!(StanceLabel::from_stance(Stance::Unassessed), None);
        assert_eq!(merge_to_three_labels(StanceLabel::PartiallySupport), StanceLabel::Support);
    }
}
