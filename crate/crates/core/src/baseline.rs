//! Keyword baseline: tf-idf bag-of-words features with one independent
//! L2-regularized logistic regression per label.
//!
//! Tokens are maximal runs of alphanumeric characters of the lowercased text;
//! tokens shorter than two characters are dropped. Features are raw counts
//! times smoothed idf (`ln((1 + n) / (1 + df)) + 1`), L2-normalized.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledExample;
use crate::labels::{Label, Prediction};
use crate::predict::{PredictError, Predictor};

pub const BASELINE_FORMAT_VERSION: u32 = 1;
pub const BASELINE_FILE: &str = "baseline.json";
pub const TOKENIZATION_RULE: &str =
    "lowercase; split on non-alphanumeric characters; drop tokens shorter than 2 characters";

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("training set is empty")]
    Empty,
    #[error("{label} is degenerate: every training example is {state}")]
    DegenerateLabel { label: Label, state: &'static str },
    #[error("invalid baseline config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("baseline format version {found} is newer than supported {supported}")]
    Version { found: u32, supported: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Tokens occurring fewer times than this across the corpus are dropped.
    pub min_token_freq: u64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            min_token_freq: 2,
            seed: 0,
            epochs: 60,
            batch_size: 16,
            learning_rate: 2.0,
            l2: 1e-4,
            threshold: 0.5,
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &str| Err(BaselineError::InvalidConfig(m.into()));
        if self.min_token_freq == 0 {
            return bad("min_token_freq must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return bad("learning_rate must be positive and l2 non-negative");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie strictly between 0 and 1");
        }
        Ok(())
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub token: String,
    pub doc_freq: u64,
    pub idf: f64,
}

/// Sorted token list; a token's position is its feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<VocabEntry>", into = "Vec<VocabEntry>")]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
}

impl From<Vec<VocabEntry>> for Vocabulary {
    fn from(entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i))
            .collect();
        Self { entries, index }
    }
}

impl From<Vocabulary> for Vec<VocabEntry> {
    fn from(v: Vocabulary) -> Self {
        v.entries
    }
}

impl Vocabulary {
    fn build(docs: &[Vec<String>], min_token_freq: u64) -> Self {
        let mut freq: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for doc in docs {
            let mut seen_here = std::collections::HashSet::new();
            for tok in doc {
                let slot = freq.entry(tok).or_default();
                slot.0 += 1;
                if seen_here.insert(tok) {
                    slot.1 += 1;
                }
            }
        }
        let n = docs.len() as f64;
        let entries: Vec<VocabEntry> = freq
            .into_iter()
            .filter(|(_, (count, _))| *count >= min_token_freq)
            .map(|(token, (_, df))| VocabEntry {
                token: token.to_owned(),
                doc_freq: df,
                idf: ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0,
            })
            .collect();
        Self::from(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Sparse tf-idf vector, ordered by feature index. Unknown tokens are dropped.
    fn featurize(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in tokens {
            if let Some(i) = self.index_of(tok) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut features: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c * self.entries[i].idf))
            .collect();
        let norm = features.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut features {
                *v /= norm;
            }
        }
        features
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    fn logit(&self, features: &[(usize, f64)]) -> f64 {
        features
            .iter()
            .fold(self.bias, |acc, (i, v)| acc + self.weights[*i] * v)
    }

    fn fit(
        features: &[Vec<(usize, f64)>],
        targets: &[f64],
        dim: usize,
        config: &BaselineConfig,
        seed: u64,
    ) -> Self {
        let mut model = Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..features.len()).collect();
        let mut grad: BTreeMap<usize, f64> = BTreeMap::new();
        for epoch in 0..config.epochs {
            let lr = config.learning_rate / (1.0 + epoch as f64 / 10.0);
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                grad.clear();
                let mut grad_bias = 0.0;
                for &i in batch {
                    let err = sigmoid(model.logit(&features[i])) - targets[i];
                    grad_bias += err;
                    for (j, v) in &features[i] {
                        *grad.entry(*j).or_default() += err * v;
                    }
                }
                let scale = lr / batch.len() as f64;
                if config.l2 > 0.0 {
                    let decay = 1.0 - lr * config.l2;
                    model.weights.iter_mut().for_each(|w| *w *= decay);
                }
                for (j, g) in &grad {
                    model.weights[*j] -= scale * g;
                }
                model.bias -= scale * grad_bias;
            }
        }
        model
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Trained keyword model. Immutable after training apart from
/// [`BaselineArtifact::retrain_label`]; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineArtifact {
    pub format_version: u32,
    pub tokenization: String,
    pub config: BaselineConfig,
    pub n_documents: usize,
    pub vocabulary: Vocabulary,
    pub bug: LinearClassifier,
    pub enhancement: LinearClassifier,
    pub question: LinearClassifier,
}

fn check_label(train: &[LabeledExample], label: Label) -> Result<(), BaselineError> {
    let positives = train.iter().filter(|e| e.labels.get(label)).count();
    if positives == 0 {
        return Err(BaselineError::DegenerateLabel { label, state: "negative" });
    }
    if positives == train.len() {
        return Err(BaselineError::DegenerateLabel { label, state: "positive" });
    }
    Ok(())
}

fn label_seed(seed: u64, label: Label) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(label.index() as u64 + 1)
}

pub fn train_baseline(
    train: &[LabeledExample],
    config: &BaselineConfig,
) -> Result<BaselineArtifact, BaselineError> {
    config.validate()?;
    if train.is_empty() {
        return Err(BaselineError::Empty);
    }
    for label in Label::ALL {
        check_label(train, label)?;
    }
    let docs: Vec<Vec<String>> = train.iter().map(|e| tokenize(&e.text)).collect();
    let vocabulary = Vocabulary::build(&docs, config.min_token_freq);
    let features: Vec<_> = docs.iter().map(|d| vocabulary.featurize(d)).collect();
    let fit = |label: Label| {
        let targets: Vec<f64> = train
            .iter()
            .map(|e| if e.labels.get(label) { 1.0 } else { 0.0 })
            .collect();
        LinearClassifier::fit(&features, &targets, vocabulary.len(), config, label_seed(config.seed, label))
    };
    Ok(BaselineArtifact {
        format_version: BASELINE_FORMAT_VERSION,
        tokenization: TOKENIZATION_RULE.into(),
        config: config.clone(),
        n_documents: train.len(),
        bug: fit(Label::Bug),
        enhancement: fit(Label::Enhancement),
        question: fit(Label::Question),
        vocabulary,
    })
}

impl BaselineArtifact {
    pub fn classifier(&self, label: Label) -> &LinearClassifier {
        match label {
            Label::Bug => &self.bug,
            Label::Enhancement => &self.enhancement,
            Label::Question => &self.question,
        }
    }

    /// Weight of `token` in the classifier for `label`, if it is in the vocabulary.
    pub fn weight(&self, label: Label, token: &str) -> Option<f64> {
        self.vocabulary
            .index_of(token)
            .map(|i| self.classifier(label).weights[i])
    }

    /// Refits one label's classifier on `train` using the stored vocabulary.
    /// The other two classifiers are left untouched.
    pub fn retrain_label(&mut self, train: &[LabeledExample], label: Label) -> Result<(), BaselineError> {
        if train.is_empty() {
            return Err(BaselineError::Empty);
        }
        check_label(train, label)?;
        let features: Vec<_> = train
            .iter()
            .map(|e| self.vocabulary.featurize(&tokenize(&e.text)))
            .collect();
        let targets: Vec<f64> = train
            .iter()
            .map(|e| if e.labels.get(label) { 1.0 } else { 0.0 })
            .collect();
        let fitted = LinearClassifier::fit(
            &features,
            &targets,
            self.vocabulary.len(),
            &self.config,
            label_seed(self.config.seed, label),
        );
        match label {
            Label::Bug => self.bug = fitted,
            Label::Enhancement => self.enhancement = fitted,
            Label::Question => self.question = fitted,
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, BaselineError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BaselineError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(BASELINE_FILE);
        let json = serde_json::to_string(self).expect("artifact serializes");
        fs::write(&path, json).map_err(io(&path))?;
        Ok(path)
    }

    /// Loads `dir/baseline.json` (or `dir` itself when it is a file).
    pub fn load(dir: &Path) -> Result<Self, BaselineError> {
        let path = if dir.is_file() {
            dir.to_path_buf()
        } else {
            dir.join(BASELINE_FILE)
        };
        let text = fs::read_to_string(&path).map_err(|source| BaselineError::Io {
            path: path.clone(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| BaselineError::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found > BASELINE_FORMAT_VERSION {
            return Err(BaselineError::Version {
                found,
                supported: BASELINE_FORMAT_VERSION,
            });
        }
        let artifact: Self = serde_json::from_value(value).map_err(|e| BaselineError::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let dim = artifact.vocabulary.len();
        if Label::ALL.iter().any(|l| artifact.classifier(*l).weights.len() != dim) {
            return Err(BaselineError::Format {
                path,
                reason: "weight vectors do not match the vocabulary size".into(),
            });
        }
        Ok(artifact)
    }
}

impl Predictor for BaselineArtifact {
    fn predict(&self, text: &str) -> Result<Prediction, PredictError> {
        if text.trim().is_empty() {
            return Err(PredictError::EmptyText);
        }
        let features = self.vocabulary.featurize(&tokenize(text));
        let probs = Label::ALL.map(|l| sigmoid(self.classifier(l).logit(&features)));
        Ok(Prediction::from_probabilities(probs, self.config.threshold))
    }

    fn model_id(&self) -> String {
        format!("tfidf-logreg(seed={})", self.config.seed)
    }
}
