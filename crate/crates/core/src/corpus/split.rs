use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::LabeledExample;
use super::oversample::OversampleReport;
use super::CorpusError;

/// Train/test partition. The test side never contains oversampled copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub split_seed: u64,
    pub split_ratio: f64,
    /// Present once the train side has been oversampled.
    pub oversample_report: Option<OversampleReport>,
}

/// Number of training examples for `n` examples at `ratio`: nearest integer,
/// kept within `1..n` whenever `n >= 2` so both sides are non-empty.
pub fn train_size(n: usize, ratio: f64) -> usize {
    let raw = (ratio * n as f64).round() as usize;
    if n < 2 {
        n
    } else {
        raw.clamp(1, n - 1)
    }
}

/// Uniformly random partition driven only by `seed`. Each side keeps the
/// input order of its members.
pub fn split_corpus(
    examples: Vec<LabeledExample>,
    ratio: f64,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    if examples.is_empty() {
        return Err(CorpusError::Empty);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let mut seen = HashSet::new();
    for ex in &examples {
        if ex.is_duplicate() {
            return Err(CorpusError::AlreadyOversampled(ex.source.to_string()));
        }
        if !seen.insert(&ex.source) {
            return Err(CorpusError::DuplicateSource(ex.source.to_string()));
        }
    }

    let n = examples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..train_size(n, ratio)] {
        in_train[i] = true;
    }

    let (train, test) = examples
        .into_iter()
        .zip(in_train)
        .fold((Vec::new(), Vec::new()), |(mut tr, mut te), (ex, is_train)| {
            if is_train {
                tr.push(ex);
            } else {
                te.push(ex);
            }
            (tr, te)
        });

    Ok(CorpusSplit {
        train,
        test,
        split_seed: seed,
        split_ratio: ratio,
        oversample_report: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::issue::SourceRef;
    use crate::labels::LabelVector;

    fn examples(n: u64) -> Vec<LabeledExample> {
        (1..=n)
            .map(|i| LabeledExample {
                text: format!("issue {i}"),
                labels: LabelVector::new(true, false, false),
                source: SourceRef::new("o", "r", i),
                duplicated_from: None,
            })
            .collect()
    }

    #[test]
    fn sizes() {
        let s = split_corpus(examples(100), 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        let s = split_corpus(examples(5), 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (4, 1));
        assert_eq!(train_size(1, 0.8), 1);
        assert_eq!(train_size(2, 0.99), 1);
        assert_eq!(train_size(2, 0.01), 1);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = split_corpus(examples(50), 0.8, 7).unwrap();
        let b = split_corpus(examples(50), 0.8, 7).unwrap();
        assert_eq!(a, b);
        let train: HashSet<_> = a.train.iter().map(|e| &e.source).collect();
        assert!(a.test.iter().all(|e| !train.contains(&e.source)));
        let c = split_corpus(examples(50), 0.8, 8).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn errors() {
        assert!(matches!(split_corpus(vec![], 0.8, 1), Err(CorpusError::Empty)));
        assert!(matches!(split_corpus(examples(3), 1.0, 1), Err(CorpusError::InvalidRatio(_))));
        assert!(matches!(split_corpus(examples(3), 0.0, 1), Err(CorpusError::InvalidRatio(_))));
        let mut dup = examples(3);
        dup.push(dup[0].clone());
        assert!(matches!(split_corpus(dup, 0.5, 1), Err(CorpusError::DuplicateSource(_))));
    }
}
