use std::ops::{Index, IndexMut};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::LabeledExample;
use super::CorpusError;
use crate::labels::Label;

/// Positive-example count per label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub bug: usize,
    pub enhancement: usize,
    pub question: usize,
}

impl LabelCounts {
    pub fn of(examples: &[LabeledExample]) -> Self {
        let mut counts = Self::default();
        for ex in examples {
            for label in ex.labels.labels() {
                counts[label] += 1;
            }
        }
        counts
    }

    pub fn max(&self) -> usize {
        Label::ALL.iter().map(|l| self[*l]).max().unwrap_or(0)
    }
}

impl Index<Label> for LabelCounts {
    type Output = usize;

    fn index(&self, label: Label) -> &usize {
        match label {
            Label::Bug => &self.bug,
            Label::Enhancement => &self.enhancement,
            Label::Question => &self.question,
        }
    }
}

impl IndexMut<Label> for LabelCounts {
    fn index_mut(&mut self, label: Label) -> &mut usize {
        match label {
            Label::Bug => &mut self.bug,
            Label::Enhancement => &mut self.enhancement,
            Label::Question => &mut self.question,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversampleReport {
    pub seed: u64,
    pub target: usize,
    pub before: LabelCounts,
    pub after: LabelCounts,
    pub duplicates_added: usize,
}

/// Duplicates randomly chosen examples carrying the currently scarcest label
/// until every label has at least as many positives as the most frequent label
/// had at the start. Originals stay in place; copies are appended with
/// `duplicated_from` set.
pub fn oversample_minority(
    train: Vec<LabeledExample>,
    seed: u64,
) -> Result<(Vec<LabeledExample>, OversampleReport), CorpusError> {
    let before = LabelCounts::of(&train);
    if let Some(label) = Label::ALL.into_iter().find(|l| before[*l] == 0) {
        return Err(CorpusError::NoPositives(label));
    }
    let target = before.max();
    let pools: Vec<Vec<usize>> = Label::ALL
        .iter()
        .map(|l| {
            train
                .iter()
                .enumerate()
                .filter(|(_, ex)| !ex.is_duplicate() && ex.labels.get(*l))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = before;
    let mut copies = Vec::new();
    loop {
        // ties resolve to slot order
        let scarcest = Label::ALL
            .into_iter()
            .filter(|l| counts[*l] < target)
            .min_by_key(|l| counts[*l]);
        let Some(label) = scarcest else { break };
        let &pick = pools[label.index()]
            .choose(&mut rng)
            .expect("pool non-empty for labels with positives");
        let original = &train[pick];
        for l in original.labels.labels() {
            counts[l] += 1;
        }
        copies.push(LabeledExample {
            duplicated_from: Some(original.source.clone()),
            ..original.clone()
        });
    }

    let report = OversampleReport {
        seed,
        target,
        before,
        after: counts,
        duplicates_added: copies.len(),
    };
    let mut out = train;
    out.extend(copies);
    Ok((out, report))
}
