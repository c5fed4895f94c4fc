//! Masked-language-model pretraining of a small encoder, for machines that
//! cannot obtain a published checkpoint.

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EncoderConfig, Pooling};
use crate::encoder::BaseEncoder;
use crate::error::{ClassifierError, Result};
use crate::model::{self, EncodedBatch, MaskedLm, Mode};
use crate::tokenizer::{TextTokenizer, SPECIAL_TOKENS};
use crate::train::ProgressSink;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub name: String,
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_sequence_length: usize,
    pub dropout: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mask_prob: f64,
    pub seed: u64,
    /// Pooling recorded for classifiers fine-tuned from this encoder.
    pub classifier_pooling: Pooling,
    /// Init scale recorded for the classification head added at fine-tuning.
    pub head_initializer_range: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        let tiny = EncoderConfig::tiny(0, 128);
        Self {
            name: "tiny".into(),
            vocab_size: 1000,
            hidden_size: tiny.hidden_size,
            num_hidden_layers: tiny.num_hidden_layers,
            num_attention_heads: tiny.num_attention_heads,
            intermediate_size: tiny.intermediate_size,
            max_sequence_length: 128,
            dropout: 0.1,
            steps: 600,
            batch_size: 16,
            learning_rate: 1e-3,
            mask_prob: 0.15,
            seed: 0,
            // A 64-wide encoder learns slowly through a first-token head with
            // the usual 0.02 init; these two settings make short runs stable.
            classifier_pooling: Pooling::Mean,
            head_initializer_range: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub steps: usize,
    pub losses: Vec<f64>,
}

impl PretrainReport {
    /// Mean loss over the first and last tenth of training.
    pub fn first_and_last(&self) -> (f64, f64) {
        let k = (self.losses.len() / 10).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (
            mean(&self.losses[..k.min(self.losses.len())]),
            mean(&self.losses[self.losses.len().saturating_sub(k)..]),
        )
    }
}

/// Replaces ~`mask_prob` of the content tokens: 80% become `<mask>`, 10% a
/// random token, 10% stay. Returns flattened positions and original ids.
/// At least one position per batch is chosen.
fn mask_batch(
    seqs: &mut [Vec<u32>],
    seq_len: usize,
    mask_id: u32,
    vocab: u32,
    mask_prob: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, Vec<u32>) {
    let first_regular = SPECIAL_TOKENS.len() as u32;
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    for (row, seq) in seqs.iter_mut().enumerate() {
        let content = seq.len().saturating_sub(1);
        for i in 1..content {
            if !rng.gen_bool(mask_prob) {
                continue;
            }
            positions.push((row * seq_len + i) as u32);
            targets.push(seq[i]);
            let roll: f64 = rng.gen();
            if roll < 0.8 {
                seq[i] = mask_id;
            } else if roll < 0.9 {
                seq[i] = rng.gen_range(first_regular..vocab);
            }
        }
    }
    if positions.is_empty() {
        if let Some((row, seq)) = seqs.iter_mut().enumerate().find(|(_, s)| s.len() > 2) {
            positions.push((row * seq_len + 1) as u32);
            targets.push(seq[1]);
            seq[1] = mask_id;
        }
    }
    (positions, targets)
}

/// Trains a tokenizer and a small encoder on `texts` with the masked-language
/// objective.
pub fn pretrain_encoder(
    texts: &[String],
    cfg: &PretrainConfig,
    progress: &mut dyn ProgressSink,
) -> Result<(BaseEncoder, PretrainReport)> {
    let texts: Vec<&String> = texts.iter().filter(|t| !t.trim().is_empty()).collect();
    if texts.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if cfg.steps == 0 || cfg.batch_size == 0 || cfg.max_sequence_length < 3 {
        return Err(ClassifierError::InvalidConfig(
            "steps, batch_size and max_sequence_length must be positive".into(),
        ));
    }
    if !(cfg.head_initializer_range.is_finite() && cfg.head_initializer_range > 0.0) {
        return Err(ClassifierError::InvalidConfig(
            "head_initializer_range must be positive".into(),
        ));
    }
    if !(cfg.mask_prob > 0.0 && cfg.mask_prob < 1.0) {
        return Err(ClassifierError::InvalidConfig("mask_prob must be in (0, 1)".into()));
    }
    let tokenizer = TextTokenizer::train(&texts, cfg.vocab_size)?;
    let mask_id = tokenizer
        .mask_id()
        .ok_or_else(|| ClassifierError::TokenizerMismatch("no <mask> token".into()))?;
    let config = EncoderConfig {
        vocab_size: tokenizer.vocab_size(),
        hidden_size: cfg.hidden_size,
        num_hidden_layers: cfg.num_hidden_layers,
        num_attention_heads: cfg.num_attention_heads,
        intermediate_size: cfg.intermediate_size,
        hidden_dropout_prob: cfg.dropout,
        attention_probs_dropout_prob: cfg.dropout,
        ..EncoderConfig::tiny(tokenizer.vocab_size(), cfg.max_sequence_length)
    };
    config.validate()?;

    let encoded: Vec<Vec<u32>> = texts
        .iter()
        .map(|t| tokenizer.encode(t, cfg.max_sequence_length))
        .collect::<Result<_>>()?;

    let device = Device::Cpu;
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
    let mlm = MaskedLm::new(&config, vb)?;
    model::seeded_init(&varmap, cfg.seed, config.initializer_range)?;
    let mut opt = AdamW::new(
        varmap.all_vars(),
        ParamsAdamW {
            lr: cfg.learning_rate,
            weight_decay: 0.01,
            ..Default::default()
        },
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = PretrainReport::default();
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut cursor = order.len();
    for step in 1..=cfg.steps {
        let mut seqs = Vec::with_capacity(cfg.batch_size);
        while seqs.len() < cfg.batch_size.min(encoded.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            seqs.push(encoded[order[cursor]].clone());
            cursor += 1;
        }
        let seq_len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let vocab = config.vocab_size as u32;
        let (positions, targets) =
            mask_batch(&mut seqs, seq_len, mask_id, vocab, cfg.mask_prob, &mut rng);
        if positions.is_empty() {
            continue;
        }
        let batch = EncodedBatch::new(&seqs, tokenizer.pad_id(), &device)?;
        let logits = mlm.forward(&batch, &positions, &mut Mode::Train(&mut rng))?;
        let targets = Tensor::from_vec(targets, positions.len(), &device)?;
        let loss = candle_nn::loss::cross_entropy(&logits, &targets)?;
        opt.backward_step(&loss)?;
        let loss = loss.to_scalar::<f32>()? as f64;
        report.losses.push(loss);
        progress.step(0, step, loss);
        if step % 50 == 0 {
            tracing::info!(step, loss, "pretraining");
        }
    }
    report.steps = report.losses.len();

    let config = EncoderConfig {
        initializer_range: cfg.head_initializer_range,
        classifier_pooling: cfg.classifier_pooling,
        ..config
    };
    let weights = model::snapshot(&varmap)?
        .into_iter()
        .filter(|(name, _)| name.starts_with("roberta."))
        .collect();
    Ok((
        BaseEncoder {
            name: cfg.name.clone(),
            config,
            tokenizer,
            weights,
        },
        report,
    ))
}
