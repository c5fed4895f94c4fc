//! Fine-tuning the encoder with a three-way sigmoid head.

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use triage_core::corpus::{fingerprint, LabelCounts, LabeledExample};
use triage_core::labels::{Label, LabelVector};

use crate::artifact::{ClassifierArtifact, OptimizerInfo, TrainingMetrics};
use crate::config::{EncoderConfig, TrainingConfig};
use crate::encoder::BaseEncoder;
use crate::error::{ClassifierError, Result};
use crate::model::{self, EncodedBatch, Mode, SequenceClassifier};
use crate::tokenizer::TextTokenizer;

/// Receives progress events during training.
pub trait ProgressSink {
    fn step(&mut self, _epoch: u32, _step: usize, _loss: f64) {}
    fn epoch(&mut self, _epoch: u32, _mean_loss: f64) {}
}

pub struct NoProgress;

impl ProgressSink for NoProgress {}

/// Mean element-wise binary cross-entropy on logits, in the numerically
/// stable form `max(x, 0) - x*y + log(1 + exp(-|x|))`.
pub fn bce_with_logits(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let softplus = logits.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?;
    let loss = logits.relu()?.sub(&logits.mul(targets)?)?.add(&softplus)?;
    Ok(loss.mean_all()?)
}

/// One optimisation state over a classifier initialised from a base encoder.
/// [`fine_tune`] drives it over epochs; tests can call [`FineTuner::step`]
/// directly.
pub struct FineTuner {
    varmap: VarMap,
    model: SequenceClassifier,
    optimizer: AdamW,
    params: ParamsAdamW,
    rng: ChaCha8Rng,
    tokenizer: TextTokenizer,
    encoder_config: EncoderConfig,
    encoder_name: String,
    config: TrainingConfig,
    device: Device,
}

impl FineTuner {
    pub fn new(base: &BaseEncoder, config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        let encoder_config = base.config.clone();
        if config.max_sequence_length > encoder_config.max_input_len() {
            return Err(ClassifierError::InvalidConfig(format!(
                "max_sequence_length {} exceeds the encoder's {} positions",
                config.max_sequence_length,
                encoder_config.max_input_len()
            )));
        }
        let device = Device::Cpu;
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
        let model = SequenceClassifier::new(&encoder_config, vb)?;
        // The head starts from the seeded init; the encoder from the base weights.
        model::seeded_init(&varmap, config.seed, encoder_config.initializer_range)?;
        model::load_into(&varmap, &base.weights, "roberta.")?;
        let params = ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            ..Default::default()
        };
        let optimizer = AdamW::new(varmap.all_vars(), params.clone())?;
        Ok(Self {
            varmap,
            model,
            optimizer,
            params,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_d20b),
            tokenizer: base.tokenizer.clone(),
            encoder_config,
            encoder_name: base.name.clone(),
            config: config.clone(),
            device,
        })
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        self.tokenizer.encode(text, self.config.max_sequence_length)
    }

    /// One optimiser step on `batch`; returns the loss before the update.
    pub fn step(&mut self, batch: &[(Vec<u32>, LabelVector)]) -> Result<f64> {
        let seqs: Vec<Vec<u32>> = batch.iter().map(|(ids, _)| ids.clone()).collect();
        let targets: Vec<f32> = batch.iter().flat_map(|(_, l)| l.as_targets()).collect();
        let encoded = EncodedBatch::new(&seqs, self.tokenizer.pad_id(), &self.device)?;
        let targets = Tensor::from_vec(targets, (batch.len(), 3), &self.device)?;
        let logits = self.model.forward(&encoded, &mut Mode::Train(&mut self.rng))?;
        let loss = bce_with_logits(&logits, &targets)?;
        self.optimizer.backward_step(&loss)?;
        Ok(loss.to_scalar::<f32>()? as f64)
    }

    fn shuffle(&mut self, order: &mut [usize]) {
        order.shuffle(&mut self.rng);
    }

    pub fn finish(
        self,
        corpus_fingerprint: String,
        train_examples: usize,
        metrics: TrainingMetrics,
    ) -> Result<ClassifierArtifact> {
        let weights = model::snapshot(&self.varmap)?;
        let optimizer = OptimizerInfo::adamw(&self.params);
        ClassifierArtifact::assemble(
            weights,
            self.tokenizer,
            self.encoder_config,
            self.encoder_name,
            self.config,
            corpus_fingerprint,
            train_examples,
            optimizer,
            metrics,
        )
    }
}

fn check_examples(train: &[LabeledExample]) -> Result<()> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if let Some(index) = train.iter().position(|e| e.text != e.text.to_lowercase()) {
        return Err(ClassifierError::NotLowercase { index });
    }
    let counts = LabelCounts::of(train);
    for label in Label::ALL {
        if counts[label] == 0 {
            return Err(ClassifierError::NoPositives(label));
        }
    }
    Ok(())
}

fn check_memory(cfg: &EncoderConfig, batch_size: usize, seq_len: usize) -> Result<()> {
    let needed = model::training_bytes(cfg, batch_size, seq_len);
    if let Some(available) = model::available_memory() {
        if needed > available {
            return Err(ClassifierError::OutOfMemory {
                batch_size,
                needed_mb: needed >> 20,
                available_mb: available >> 20,
            });
        }
    }
    Ok(())
}

/// Fine-tunes the encoder named by `config.base_encoder`.
pub fn fine_tune(
    train: &[LabeledExample],
    config: &TrainingConfig,
    progress: &mut dyn ProgressSink,
) -> Result<ClassifierArtifact> {
    config.validate()?;
    check_examples(train)?;
    let base = BaseEncoder::resolve(&config.base_encoder)?;
    fine_tune_from(train, &base, config, progress)
}

/// Fine-tunes an already loaded base encoder.
pub fn fine_tune_from(
    train: &[LabeledExample],
    base: &BaseEncoder,
    config: &TrainingConfig,
    progress: &mut dyn ProgressSink,
) -> Result<ClassifierArtifact> {
    config.validate()?;
    check_examples(train)?;
    let mut tuner = FineTuner::new(base, config)?;
    let encoded: Vec<(Vec<u32>, LabelVector)> = train
        .iter()
        .map(|e| Ok((tuner.encode(&e.text)?, e.labels)))
        .collect::<Result<_>>()?;
    let longest = encoded.iter().map(|(ids, _)| ids.len()).max().unwrap_or(0);
    check_memory(&tuner.encoder_config, config.batch_size, longest)?;

    let mut metrics = TrainingMetrics::default();
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for epoch in 1..=config.epochs {
        tuner.shuffle(&mut order);
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<u32>, LabelVector)> =
                chunk.iter().map(|&i| encoded[i].clone()).collect();
            let loss = tuner.step(&batch)?;
            steps += 1;
            total += loss;
            metrics.step_losses.push(loss);
            progress.step(epoch, steps, loss);
        }
        let mean = total / steps as f64;
        tracing::info!(epoch, loss = mean, "epoch finished");
        metrics.epoch_losses.push(mean);
        progress.epoch(epoch, mean);
    }
    tuner.finish(fingerprint(train), train.len(), metrics)
}
