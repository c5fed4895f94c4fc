//! Core data model and classical components for multi-label issue triage.
//!
//! Raw [`issue::IssueRecord`]s are archived as JSON lines ([`archive`]),
//! turned into a split, balanced corpus of [`corpus::LabeledExample`]s, and
//! scored with per-label [`metrics`]. [`baseline`] holds the bag-of-words
//! comparison model.

pub mod archive;
pub mod baseline;
pub mod corpus;
pub mod issue;
pub mod labels;
pub mod metrics;
pub mod predict;
pub mod synthetic;

pub use issue::{IssueRecord, RepoRef, SourceRef};
pub use labels::{Label, LabelVector, Prediction};
pub use predict::{evaluate_predictor, BatchPredictError, PredictError, Predictor};
