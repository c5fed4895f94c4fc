use serde::{Deserialize, Serialize};

use crate::error::ClassifierError;

/// Encoder hyperparameters, serialized with the field names of a Hugging Face
/// RoBERTa `config.json` so real checkpoints can be dropped in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "one")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_dropout")]
    pub hidden_dropout_prob: f64,
    #[serde(default = "default_dropout")]
    pub attention_probs_dropout_prob: f64,
    #[serde(default = "one_u32")]
    pub pad_token_id: u32,
    #[serde(default)]
    pub bos_token_id: u32,
    #[serde(default = "two")]
    pub eos_token_id: u32,
    /// Standard deviation of freshly initialized weights.
    #[serde(default = "default_init_range")]
    pub initializer_range: f64,
    /// How the classification head summarizes the sequence.
    #[serde(default)]
    pub classifier_pooling: Pooling,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// The `<s>` token, as in the standard sequence-classification head.
    #[default]
    First,
    /// Mean over non-padding tokens.
    Mean,
}

fn one() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn two() -> u32 {
    2
}
fn default_eps() -> f64 {
    1e-5
}
fn default_init_range() -> f64 {
    0.02
}
fn default_dropout() -> f64 {
    0.1
}

impl EncoderConfig {
    /// 12 layers, 768 hidden units, 12 heads.
    pub fn roberta_base() -> Self {
        Self {
            vocab_size: 50265,
            hidden_size: 768,
            num_hidden_layers: 12,
            num_attention_heads: 12,
            intermediate_size: 3072,
            max_position_embeddings: 514,
            type_vocab_size: 1,
            layer_norm_eps: 1e-5,
            hidden_dropout_prob: 0.1,
            attention_probs_dropout_prob: 0.1,
            pad_token_id: 1,
            bos_token_id: 0,
            eos_token_id: 2,
            initializer_range: 0.02,
            classifier_pooling: Pooling::First,
        }
    }

    /// Small encoder for CPU runs: 2 layers, 64 hidden units, 4 heads.
    pub fn tiny(vocab_size: usize, max_sequence_length: usize) -> Self {
        Self {
            vocab_size,
            hidden_size: 64,
            num_hidden_layers: 2,
            num_attention_heads: 4,
            intermediate_size: 256,
            max_position_embeddings: max_sequence_length + 2,
            ..Self::roberta_base()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_attention_heads
    }

    /// Longest input (special tokens included) the position table can hold.
    pub fn max_input_len(&self) -> usize {
        self.max_position_embeddings
            .saturating_sub(self.pad_token_id as usize + 1)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.hidden_size == 0 || self.num_attention_heads == 0 || self.num_hidden_layers == 0 {
            return bad("encoder dimensions must be positive");
        }
        if self.hidden_size % self.num_attention_heads != 0 {
            return bad("hidden_size must be divisible by num_attention_heads");
        }
        if !(self.initializer_range.is_finite() && self.initializer_range > 0.0) {
            return bad("initializer_range must be positive");
        }
        if !(0.0..1.0).contains(&self.hidden_dropout_prob)
            || !(0.0..1.0).contains(&self.attention_probs_dropout_prob)
        {
            return bad("dropout probabilities must be in [0, 1)");
        }
        Ok(())
    }
}

/// Fine-tuning hyperparameters. Defaults follow the original full-scale
/// recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub max_sequence_length: usize,
    pub batch_size: usize,
    /// Preset name or path of a base encoder directory.
    pub base_encoder: String,
    pub seed: u64,
    pub decision_threshold: f64,
    pub weight_decay: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 4e-5,
            max_sequence_length: 128,
            batch_size: 8,
            base_encoder: "roberta-base".to_string(),
            seed: 0,
            decision_threshold: 0.5,
            weight_decay: 0.01,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_sequence_length < 3 {
            return bad("max_sequence_length must leave room for the special tokens");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie strictly inside (0, 1)");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if self.base_encoder.trim().is_empty() {
            return bad("base_encoder must be named");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainingConfig::default().validate().unwrap();
        EncoderConfig::roberta_base().validate().unwrap();
        EncoderConfig::tiny(500, 128).validate().unwrap();
    }

    #[test]
    fn threshold_bounds_are_open() {
        for t in [0.0, 1.0, -0.1, f64::NAN] {
            let c = TrainingConfig {
                decision_threshold: t,
                ..Default::default()
            };
            assert!(c.validate().is_err(), "{t}");
        }
    }

    #[test]
    fn tiny_fits_its_sequence_length() {
        assert_eq!(EncoderConfig::tiny(10, 128).max_input_len(), 128);
        assert_eq!(EncoderConfig::roberta_base().max_input_len(), 512);
    }

    #[test]
    fn hf_config_parses() {
        let json = r#"{"architectures":["RobertaForMaskedLM"],"vocab_size":50265,"hidden_size":768,
            "num_hidden_layers":12,"num_attention_heads":12,"intermediate_size":3072,
            "max_position_embeddings":514,"type_vocab_size":1,"layer_norm_eps":1e-05,
            "hidden_act":"gelu","pad_token_id":1,"bos_token_id":0,"eos_token_id":2}"#;
        let c: EncoderConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c, EncoderConfig::roberta_base());
    }
}
