//! From raw issue records to a labeled, split and balanced corpus.
//!
//! Pipeline: drop pull requests, normalize labels by exact match, keep
//! English issues, lowercase `title + "\n" + body`, optionally subsample,
//! split into train/test, then oversample minority labels in train only.
//! No stemming, stop-word removal or markdown stripping is applied.

mod example;
mod language;
mod normalize;
mod oversample;
mod split;
pub mod store;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use example::{issue_text, make_example, raw_issue_text, LabeledExample};
pub use language::{detect_english, LanguageDetector, WhatlangDetector};
pub use normalize::normalize_labels;
pub use oversample::{oversample_minority, LabelCounts, OversampleReport};
pub use split::{split_corpus, train_size, CorpusSplit};
pub use store::{fingerprint, Split};

use crate::issue::IssueRecord;
use crate::labels::Label;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("{0} has no positive examples")]
    NoPositives(Label),
    #[error("source {0} appears more than once")]
    DuplicateSource(String),
    #[error("example {0} is an oversampled copy; split before oversampling")]
    AlreadyOversampled(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub ratio: f64,
    pub seed: u64,
    pub oversample: bool,
    /// Randomly keep this many labeled English issues before splitting.
    pub sample: Option<usize>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            ratio: 0.8,
            seed: 0,
            oversample: true,
            sample: None,
        }
    }
}

/// Where the raw records went.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub pull_requests: usize,
    pub unlabeled: usize,
    pub non_english: usize,
    pub labeled_english: usize,
    pub sampled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCorpus {
    pub split: CorpusSplit,
    pub stats: CorpusStats,
}

// Keeps the sampling stream independent of the split stream for the same seed.
const SAMPLE_STREAM: u64 = 0x5a4d_504c_4553;

pub fn prepare_corpus<I>(
    records: I,
    detector: &dyn LanguageDetector,
    options: &PrepareOptions,
) -> Result<PreparedCorpus, CorpusError>
where
    I: IntoIterator<Item = IssueRecord>,
{
    let mut stats = CorpusStats::default();
    let mut examples = Vec::new();
    for record in records {
        stats.records += 1;
        if record.is_pull_request {
            stats.pull_requests += 1;
            continue;
        }
        if normalize_labels(&record.raw_labels).is_empty() {
            stats.unlabeled += 1;
            continue;
        }
        match make_example(&record, detector) {
            Some(ex) => examples.push(ex),
            None => stats.non_english += 1,
        }
    }
    stats.labeled_english = examples.len();

    if let Some(k) = options.sample {
        if k < examples.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ SAMPLE_STREAM);
            let mut keep = rand::seq::index::sample(&mut rng, examples.len(), k).into_vec();
            keep.sort_unstable();
            let mut keep = keep.into_iter().peekable();
            examples = examples
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.next_if_eq(i).is_some())
                .map(|(_, ex)| ex)
                .collect();
        }
    }
    stats.sampled = examples.len();

    let mut split = split_corpus(examples, options.ratio, options.seed)?;
    if options.oversample {
        let (train, report) = oversample_minority(std::mem::take(&mut split.train), options.seed)?;
        split.train = train;
        split.oversample_report = Some(report);
    }
    Ok(PreparedCorpus { split, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::issue::RepoRef;
    use chrono::Utc;

    struct Everything;
    impl LanguageDetector for Everything {
        fn is_english(&self, _: &str) -> bool {
            true
        }
    }

    fn record(n: u64, labels: &[&str], pr: bool) -> IssueRecord {
        IssueRecord {
            repo: RepoRef::new("o", "r", "Go", 1).unwrap(),
            issue_number: n,
            title: format!("Issue {n}"),
            body: "Body".into(),
            raw_labels: labels.iter().map(|s| s.to_string()).collect(),
            created_at: Utc::now(),
            is_pull_request: pr,
        }
    }

    #[test]
    fn stats_account_for_every_record() {
        let mut records = vec![record(1, &["bug"], true), record(2, &["wontfix"], false)];
        for n in 3..23 {
            let label = ["bug", "enhancement", "question"][n as usize % 3];
            records.push(record(n, &[label], false));
        }
        let out = prepare_corpus(records, &Everything, &PrepareOptions::default()).unwrap();
        assert_eq!(out.stats.records, 22);
        assert_eq!(out.stats.pull_requests, 1);
        assert_eq!(out.stats.unlabeled, 1);
        assert_eq!(out.stats.labeled_english, 20);
        assert_eq!(out.split.test.len(), 4);
        assert!(out.split.test.iter().all(|e| !e.is_duplicate()));
    }

    #[test]
    fn sampling_is_seeded() {
        let records: Vec<_> = (1..=50).map(|n| record(n, &["bug", "question", "enhancement"], false)).collect();
        let opts = PrepareOptions {
            sample: Some(10),
            oversample: false,
            seed: 4,
            ..Default::default()
        };
        let a = prepare_corpus(records.clone(), &Everything, &opts).unwrap();
        let b = prepare_corpus(records, &Everything, &opts).unwrap();
        assert_eq!(a.stats.sampled, 10);
        assert_eq!(a, b);
        assert_eq!(a.split.train.len() + a.split.test.len(), 10);
    }
}
