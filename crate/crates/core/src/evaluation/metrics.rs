//! Lexical and semantic similarity metrics over whitespace tokens.
//!
//! All metrics share [`tokenize`](crate::text::tokenize): split on
//! whitespace, lowercase, trim non-alphanumeric characters at token edges,
//! drop tokens that become empty.

use std::collections::HashSet;

use crate::providers::{cosine, EmbeddingProvider, ProviderResult};
use crate::text::tokenize;

/// Word-level Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag } else { 1 + diag.min(above).min(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// Word edit distance divided by the longer token count; 0 when both texts
/// have no tokens.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokenize(a), tokenize(b));
    let longest = ta.len().max(tb.len());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(&ta, &tb) as f64 / longest as f64
}

fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Jaccard similarity of token sets; 1 when both are empty.
pub fn word_overlap(a: &str, b: &str) -> f64 {
    let sa: HashSet<String> = tokenize(a).into_iter().collect();
    let sb: HashSet<String> = tokenize(b).into_iter().collect();
    jaccard(&sa, &sb)
}

fn ngrams(tokens: &[String], n: usize) -> HashSet<Vec<String>> {
    if tokens.is_empty() {
        return HashSet::new();
    }
    if tokens.len() < n {
        return std::iter::once(tokens.to_vec()).collect();
    }
    tokens.windows(n).map(<[String]>::to_vec).collect()
}

/// One minus the Jaccard similarity of n-gram sets. A text shorter than
/// `n` tokens contributes its whole token sequence as a single gram.
pub fn ngram_distance(a: &str, b: &str, n: usize) -> f64 {
    let n = n.max(1);
    1.0 - jaccard(&ngrams(&tokenize(a), n), &ngrams(&tokenize(b), n))
}

pub fn embedding_cosine(a: &str, b: &str, embedder: &dyn EmbeddingProvider) -> ProviderResult<f64> {
    let va = embedder.embed(a)?;
    let vb = embedder.embed(b)?;
    Ok(cosine(&va, &vb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(normalized_edit_distance("", ""), 0.0);
        assert_eq!(normalized_edit_distance("a b c d", "a b x d"), 0.25);
        assert_eq!(normalized_edit_distance("The cat.", "the CAT"), 0.0);
        assert_eq!(word_overlap("", ""), 1.0);
        assert_eq!(word_overlap("a b", "b c"), 1.0 / 3.0);
        assert_eq!(ngram_distance("a b c", "a b c", 2), 0.0);
        assert_eq!(ngram_distance("a b c", "a b d", 2), 1.0 - 1.0 / 3.0);
        assert_eq!(ngram_distance("a", "a", 2), 0.0);
        assert_eq!(ngram_distance("a", "b", 2), 1.0);
        assert_eq!(ngram_distance("", "", 2), 0.0);
    }

    #[test]
    fn edit_distance_classic() {
        let a: Vec<char> = "kitten".chars().collect();
        let b: Vec<char> = "sitting".chars().collect();
        assert_eq!(edit_distance(&a, &b), 3);
        assert_eq!(edit_distance::<char>(&[], &b), 7);
        assert_eq!(edit_distance::<char>(&a, &[]), 6);
    }

    proptest! {
        #[test]
        fn axioms(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}") {
            for v in [normalized_edit_distance(&a, &b), word_overlap(&a, &b), ngram_distance(&a, &b, 2)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(normalized_edit_distance(&a, &b), normalized_edit_distance(&b, &a));
            prop_assert_eq!(word_overlap(&a, &b), word_overlap(&b, &a));
            prop_assert_eq!(ngram_distance(&a, &b, 2), ngram_distance(&b, &a, 2));
            prop_assert_eq!(normalized_edit_distance(&a, &a), 0.0);
            prop_assert_eq!(word_overlap(&a, &a), 1.0);
            prop_assert_eq!(ngram_distance(&a, &a, 2), 0.0);
        }
    }
}
