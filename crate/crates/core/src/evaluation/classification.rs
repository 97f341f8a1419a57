//! Accuracy and per-label / macro precision, recall and F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which labels enter the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelConvention {
    /// Labels occurring in the gold or the predicted vector.
    #[default]
    Observed,
    /// Every label of the label space, observed or not.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[gold][pred]`, indexed like `labels`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, gold: &str, pred: &str) -> usize {
        match (self.index(gold), self.index(pred)) {
            (Some(g), Some(p)) => self.counts[g][p],
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub convention: LabelConvention,
    /// Labels in the macro average, with their scores.
    pub per_label: BTreeMap<String, LabelScores>,
    pub confusion: ConfusionMatrix,
}

impl ClassificationReport {
    pub fn label(&self, name: &str) -> Option<&LabelScores> {
        self.per_label.get(name)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predictions against gold labels. Precision or recall with an
/// empty denominator is 0. Labels outside `label_space` are rejected.
pub fn eval_classification<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    label_space: &[&str],
    convention: LabelConvention,
) -> Result<ClassificationReport> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!("{} gold labels but {} predictions", gold.len(), pred.len())));
    }
    for l in gold.iter().map(AsRef::as_ref).chain(pred.iter().map(AsRef::as_ref)) {
        if !label_space.contains(&l) {
            return Err(Error::InvalidInput(format!("label {l:?} is not in the label space {label_space:?}")));
        }
    }
    let space: Vec<String> = label_space.iter().map(|s| s.to_string()).collect();
    let mut counts = vec![vec![0usize; space.len()]; space.len()];
    let idx = |l: &str| space.iter().position(|s| s == l).expect("checked above");
    for (g, p) in gold.iter().zip(pred) {
        counts[idx(g.as_ref())][idx(p.as_ref())] += 1;
    }
    let confusion = ConfusionMatrix { labels: space.clone(), counts };

    let observed: BTreeSet<usize> = gold
        .iter()
        .map(|g| idx(g.as_ref()))
        .chain(pred.iter().map(|p| idx(p.as_ref())))
        .collect();
    let included: Vec<usize> = match convention {
        LabelConvention::Full => (0..space.len()).collect(),
        LabelConvention::Observed => observed.into_iter().collect(),
    };

    let n = gold.len();
    let correct: usize = (0..space.len()).map(|i| confusion.counts[i][i]).sum();
    let mut per_label = BTreeMap::new();
    for &i in &included {
        let tp = confusion.counts[i][i];
        let predicted: usize = (0..space.len()).map(|g| confusion.counts[g][i]).sum();
        let support: usize = confusion.counts[i].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        per_label.insert(space[i].clone(), LabelScores { precision, recall, f1, support });
    }
    let mean = |f: fn(&LabelScores) -> f64| {
        if per_label.is_empty() {
            0.0
        } else {
            per_label.values().map(f).sum::<f64>() / per_label.len() as f64
        }
    };
    Ok(ClassificationReport {
        n,
        accuracy: ratio(correct, n),
        macro_precision: mean(|s| s.precision),
        macro_recall: mean(|s| s.recall),
        macro_f1: mean(|s| s.f1),
        convention,
        per_label,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted() {
        let gold = ["a", "b", "a"];
        let r = eval_classification(&gold, &gold, &["a", "b"], LabelConvention::Observed).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
        let r = eval_classification(&gold, &["b", "a", "b"], &["a", "b"], LabelConvention::Observed).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (0.0, 0.0));
        assert_eq!(r.confusion.get("a", "b"), 2);
    }

    #[test]
    fn convention_changes_label_set() {
        let gold = ["a", "a", "b"];
        let pred = ["a", "a", "a"];
        let obs = eval_classification(&gold, &pred, &["a", "b", "c"], LabelConvention::Observed).unwrap();
        let full = eval_classification(&gold, &pred, &["a", "b", "c"], LabelConvention::Full).unwrap();
        assert_eq!(obs.per_label.len(), 2);
        assert_eq!(full.per_label.len(), 3);
        assert!((obs.macro_precision - (2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((full.macro_precision - (2.0 / 3.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eval_classification(&["a"], &["a", "b"], &["a", "b"], LabelConvention::Observed).is_err());
        assert!(eval_classification(&["z"], &["a"], &["a", "b"], LabelConvention::Observed).is_err());
        let empty: [&str; 0] = [];
        let r = eval_classification(&empty, &empty, &["a"], LabelConvention::Observed).unwrap();
        assert_eq!(r.n, 0);
    }
}
