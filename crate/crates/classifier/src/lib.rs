//! Multi-label issue classifier built on a RoBERTa-style encoder.
//!
//! [`fine_tune`] trains a three-way sigmoid head (bug, enhancement, question)
//! on top of a pretrained [`BaseEncoder`] and returns a [`ClassifierArtifact`]
//! that can be saved, loaded and used as a [`triage_core::Predictor`].
//! [`pretrain_encoder`] produces a small base encoder from unlabeled text when
//! no published checkpoint is available.

pub mod artifact;
pub mod config;
pub mod encoder;
pub mod error;
pub mod model;
pub mod pretrain;
pub mod tokenizer;
pub mod train;

pub use artifact::{ArtifactMeta, ClassifierArtifact, TrainingMetrics, FORMAT_VERSION};
pub use config::{EncoderConfig, TrainingConfig};
pub use encoder::BaseEncoder;
pub use error::ClassifierError;
pub use pretrain::{pretrain_encoder, PretrainConfig, PretrainReport};
pub use tokenizer::TextTokenizer;
pub use train::{fine_tune, fine_tune_from, FineTuner, NoProgress, ProgressSink};
