//! Trained classifier: weights, tokenizer and metadata, saved as a directory.
//!
//! ```text
//! <dir>/model.safetensors   encoder + head weights
//! <dir>/tokenizer.json      paired tokenizer
//! <dir>/config.json         ArtifactMeta (training config, fingerprint, checksums)
//! <dir>/metrics.json        loss curve
//! ```

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{ParamsAdamW, VarBuilder};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use triage_core::labels::Prediction;
use triage_core::predict::{PredictError, Predictor};

use crate::config::{EncoderConfig, TrainingConfig};
use crate::encoder::{CONFIG_FILE, TOKENIZER_FILE, WEIGHTS_FILE};
use crate::error::{ClassifierError, Result};
use crate::model::{EncodedBatch, Mode, SequenceClassifier};
use crate::tokenizer::TextTokenizer;

pub const FORMAT_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub name: String,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub schedule: String,
}

impl OptimizerInfo {
    pub fn adamw(p: &ParamsAdamW) -> Self {
        Self {
            name: "adamw".into(),
            learning_rate: p.lr,
            beta1: p.beta1,
            beta2: p.beta2,
            eps: p.eps,
            weight_decay: p.weight_decay,
            schedule: "constant".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub epoch_losses: Vec<f64>,
    pub step_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub format_version: u32,
    pub created_at: DateTime<Utc>,
    pub training: TrainingConfig,
    pub encoder: EncoderConfig,
    pub base_encoder: String,
    pub corpus_fingerprint: String,
    pub train_examples: usize,
    pub loss: String,
    pub optimizer: OptimizerInfo,
    pub epoch_losses: Vec<f64>,
    pub weights_sha256: String,
    pub tokenizer_sha256: String,
}

pub struct ClassifierArtifact {
    model: SequenceClassifier,
    weights: HashMap<String, Tensor>,
    tokenizer: TextTokenizer,
    tokenizer_json: String,
    weights_bytes: Vec<u8>,
    meta: ArtifactMeta,
    metrics: TrainingMetrics,
}

impl std::fmt::Debug for ClassifierArtifact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassifierArtifact")
            .field("meta", &self.meta)
            .finish_non_exhaustive()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn build_model(
    weights: &HashMap<String, Tensor>,
    encoder: &EncoderConfig,
) -> Result<SequenceClassifier> {
    let vb = VarBuilder::from_tensors(weights.clone(), DType::F32, &Device::Cpu);
    SequenceClassifier::new(encoder, vb)
}

impl ClassifierArtifact {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        weights: HashMap<String, Tensor>,
        tokenizer: TextTokenizer,
        encoder: EncoderConfig,
        base_encoder: String,
        training: TrainingConfig,
        corpus_fingerprint: String,
        train_examples: usize,
        optimizer: OptimizerInfo,
        metrics: TrainingMetrics,
    ) -> Result<Self> {
        let weights_bytes = safetensors::serialize(&weights, &None)
            .map_err(|e| candle_core::Error::Msg(e.to_string()))?;
        let tokenizer_json = tokenizer.to_json()?;
        let model = build_model(&weights, &encoder)?;
        let meta = ArtifactMeta {
            format_version: FORMAT_VERSION,
            created_at: Utc::now(),
            training,
            encoder,
            base_encoder,
            corpus_fingerprint,
            train_examples,
            loss: "binary_cross_entropy_with_logits".into(),
            optimizer,
            epoch_losses: metrics.epoch_losses.clone(),
            weights_sha256: sha256_hex(&weights_bytes),
            tokenizer_sha256: sha256_hex(tokenizer_json.as_bytes()),
        };
        Ok(Self {
            model,
            weights,
            tokenizer,
            tokenizer_json,
            weights_bytes,
            meta,
            metrics,
        })
    }

    pub fn meta(&self) -> &ArtifactMeta {
        &self.meta
    }

    pub fn metrics(&self) -> &TrainingMetrics {
        &self.metrics
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.meta.training
    }

    pub fn threshold(&self) -> f64 {
        self.meta.training.decision_threshold
    }

    /// `v<format>+<first 12 hex digits of the weights checksum>`
    pub fn version(&self) -> String {
        format!("v{}+{}", self.meta.format_version, &self.meta.weights_sha256[..12])
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(ClassifierError::io(dir))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(ClassifierError::io(&path))
        };
        write(WEIGHTS_FILE, &self.weights_bytes)?;
        write(TOKENIZER_FILE, self.tokenizer_json.as_bytes())?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        write(CONFIG_FILE, (meta + "\n").as_bytes())?;
        let metrics = serde_json::to_string_pretty(&self.metrics).expect("metrics serialize");
        write(METRICS_FILE, (metrics + "\n").as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read(&path).map_err(ClassifierError::io(&path))
        };
        let format_err = |name: &str, reason: String| ClassifierError::Format {
            path: dir.join(name),
            reason,
        };
        let raw_meta = read(CONFIG_FILE)?;
        let probe: serde_json::Value =
            serde_json::from_slice(&raw_meta).map_err(|e| format_err(CONFIG_FILE, e.to_string()))?;
        let found = probe
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| format_err(CONFIG_FILE, "missing format_version".into()))?;
        if found > FORMAT_VERSION as u64 {
            return Err(ClassifierError::VersionMismatch {
                found: found.min(u32::MAX as u64) as u32,
                supported: FORMAT_VERSION,
            });
        }
        let meta: ArtifactMeta =
            serde_json::from_value(probe).map_err(|e| format_err(CONFIG_FILE, e.to_string()))?;

        let weights_bytes = read(WEIGHTS_FILE)?;
        verify(WEIGHTS_FILE, &meta.weights_sha256, &weights_bytes)?;
        let tokenizer_bytes = read(TOKENIZER_FILE)?;
        verify(TOKENIZER_FILE, &meta.tokenizer_sha256, &tokenizer_bytes)?;

        let tokenizer_json = String::from_utf8(tokenizer_bytes)
            .map_err(|e| format_err(TOKENIZER_FILE, e.to_string()))?;
        let tokenizer = TextTokenizer::from_json(&tokenizer_json)?;
        if tokenizer.vocab_size() > meta.encoder.vocab_size {
            return Err(ClassifierError::TokenizerMismatch(format!(
                "tokenizer has {} entries, embedding table {}",
                tokenizer.vocab_size(),
                meta.encoder.vocab_size
            )));
        }
        let weights = candle_core::safetensors::load_buffer(&weights_bytes, &Device::Cpu)?;
        let model = build_model(&weights, &meta.encoder)?;
        let metrics = match read(METRICS_FILE) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| format_err(METRICS_FILE, e.to_string()))?,
            Err(_) => TrainingMetrics {
                epoch_losses: meta.epoch_losses.clone(),
                step_losses: Vec::new(),
            },
        };
        Ok(Self {
            model,
            weights,
            tokenizer,
            tokenizer_json,
            weights_bytes,
            meta,
            metrics,
        })
    }

    /// Raw per-label probabilities for already lowercased `text`.
    fn probabilities(&self, text: &str) -> Result<[f64; 3]> {
        let ids = self.tokenizer.encode(text, self.meta.training.max_sequence_length)?;
        if let Some(bad) = ids.iter().find(|&&id| id as usize >= self.meta.encoder.vocab_size) {
            return Err(ClassifierError::TokenizerMismatch(format!(
                "token id {bad} outside the embedding table"
            )));
        }
        let batch = EncodedBatch::new(&[ids], self.tokenizer.pad_id(), &Device::Cpu)?;
        let logits = self.model.forward(&batch, &mut Mode::Eval)?.to_vec2::<f32>()?;
        let sigmoid = |x: f32| 1.0 / (1.0 + (-(x as f64)).exp());
        Ok([sigmoid(logits[0][0]), sigmoid(logits[0][1]), sigmoid(logits[0][2])])
    }

    /// Lowercases and truncates `text`, then returns three independent
    /// probabilities and the thresholded labels.
    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        if text.trim().is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        let probs = self.probabilities(&text.to_lowercase())?;
        Ok(Prediction::from_probabilities(probs, self.threshold()))
    }

    /// Named tensors of the trained model.
    pub fn weights(&self) -> &HashMap<String, Tensor> {
        &self.weights
    }
}

fn verify(file: &str, expected: &str, bytes: &[u8]) -> Result<()> {
    let found = sha256_hex(bytes);
    if found != expected {
        return Err(ClassifierError::ChecksumMismatch {
            file: file.to_string(),
            expected: expected.to_string(),
            found,
        });
    }
    Ok(())
}

impl Predictor for ClassifierArtifact {
    fn predict(&self, text: &str) -> Result<Prediction, PredictError> {
        self.predict_text(text).map_err(|e| match e {
            ClassifierError::EmptyText => PredictError::EmptyText,
            other => PredictError::Model(other.to_string()),
        })
    }

    fn model_id(&self) -> String {
        format!("transformer({}, {})", self.meta.base_encoder, self.version())
    }
}
