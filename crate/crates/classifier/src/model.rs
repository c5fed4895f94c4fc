//! RoBERTa-layout encoder with a multi-label classification head and a
//! masked-language-model head. Variable names follow the Hugging Face
//! checkpoint layout (`roberta.encoder.layer.N.attention.self.query`, ...).

use std::collections::HashMap;

use candle_core::{DType, Device, IndexOp, Module, Tensor, D};
use candle_nn::{embedding, linear, Embedding, Linear, VarBuilder, VarMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{EncoderConfig, Pooling};
use crate::error::{ClassifierError, Result};

pub const NUM_LABELS: usize = 3;

/// Forward-pass mode. Dropout masks come from the caller's seeded RNG so
/// training runs are reproducible.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    fn dropout(&mut self, x: &Tensor, p: f64) -> Result<Tensor> {
        let rng = match self {
            Mode::Train(rng) if p > 0.0 => rng,
            _ => return Ok(x.clone()),
        };
        let keep = (1.0 / (1.0 - p)) as f32;
        let mask: Vec<f32> = (0..x.elem_count())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape(), x.device())?;
        Ok(x.mul(&mask)?)
    }
}

/// Padded token ids plus the derived position ids and additive attention mask.
pub struct EncodedBatch {
    pub input_ids: Tensor,
    pub position_ids: Tensor,
    pub attention_bias: Tensor,
    /// `(batch, seq, 1)`, 1 for real tokens and 0 for padding.
    pub token_mask: Tensor,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl EncodedBatch {
    pub fn new(seqs: &[Vec<u32>], pad_id: u32, device: &Device) -> Result<Self> {
        let b = seqs.len();
        let s = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(b * s);
        let mut pos = Vec::with_capacity(b * s);
        let mut bias = Vec::with_capacity(b * s);
        let mut keep = Vec::with_capacity(b * s);
        for seq in seqs {
            for i in 0..s {
                if let Some(&id) = seq.get(i) {
                    ids.push(id);
                    pos.push(pad_id + 1 + i as u32);
                    bias.push(0f32);
                    keep.push(1f32);
                } else {
                    ids.push(pad_id);
                    pos.push(pad_id);
                    bias.push(-1e9f32);
                    keep.push(0f32);
                }
            }
        }
        Ok(Self {
            input_ids: Tensor::from_vec(ids, (b, s), device)?,
            position_ids: Tensor::from_vec(pos, (b, s), device)?,
            attention_bias: Tensor::from_vec(bias, (b, 1, 1, s), device)?,
            token_mask: Tensor::from_vec(keep, (b, s, 1), device)?,
            batch_size: b,
            seq_len: s,
        })
    }
}

struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f32,
}

impl LayerNorm {
    fn new(size: usize, eps: f64, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            weight: vb.get(size, "weight")?,
            bias: vb.get(size, "bias")?,
            eps: eps as f32,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        // Composed of differentiable primitives; the fused kernel has no backward pass.
        Ok(candle_nn::ops::layer_norm_slow(x, &self.weight, &self.bias, self.eps)?)
    }
}

struct Embeddings {
    word: Embedding,
    position: Embedding,
    token_type: Embedding,
    norm: LayerNorm,
    dropout: f64,
}

impl Embeddings {
    fn new(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            word: embedding(cfg.vocab_size, cfg.hidden_size, vb.pp("word_embeddings"))?,
            position: embedding(
                cfg.max_position_embeddings,
                cfg.hidden_size,
                vb.pp("position_embeddings"),
            )?,
            token_type: embedding(cfg.type_vocab_size, cfg.hidden_size, vb.pp("token_type_embeddings"))?,
            norm: LayerNorm::new(cfg.hidden_size, cfg.layer_norm_eps, vb.pp("LayerNorm"))?,
            dropout: cfg.hidden_dropout_prob,
        })
    }

    fn forward(&self, batch: &EncodedBatch, mode: &mut Mode) -> Result<Tensor> {
        let words = self.word.forward(&batch.input_ids)?;
        let positions = self.position.forward(&batch.position_ids)?;
        let token_type = self.token_type.embeddings().i(0)?;
        let x = words.add(&positions)?.broadcast_add(&token_type)?;
        let x = self.norm.forward(&x)?;
        mode.dropout(&x, self.dropout)
    }
}

struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
    heads: usize,
    head_dim: usize,
    hidden_dropout: f64,
    attn_dropout: f64,
}

impl Layer {
    fn new(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        let attn = vb.pp("attention");
        let sa = attn.pp("self");
        Ok(Self {
            query: linear(h, h, sa.pp("query"))?,
            key: linear(h, h, sa.pp("key"))?,
            value: linear(h, h, sa.pp("value"))?,
            attn_out: linear(h, h, attn.pp("output").pp("dense"))?,
            attn_norm: LayerNorm::new(h, cfg.layer_norm_eps, attn.pp("output").pp("LayerNorm"))?,
            intermediate: linear(h, cfg.intermediate_size, vb.pp("intermediate").pp("dense"))?,
            output: linear(cfg.intermediate_size, h, vb.pp("output").pp("dense"))?,
            out_norm: LayerNorm::new(h, cfg.layer_norm_eps, vb.pp("output").pp("LayerNorm"))?,
            heads: cfg.num_attention_heads,
            head_dim: cfg.head_dim(),
            hidden_dropout: cfg.hidden_dropout_prob,
            attn_dropout: cfg.attention_probs_dropout_prob,
        })
    }

    fn split_heads(&self, x: &Tensor, b: usize, s: usize) -> Result<Tensor> {
        Ok(x.reshape((b, s, self.heads, self.head_dim))?
            .transpose(1, 2)?
            .contiguous()?)
    }

    fn forward(&self, x: &Tensor, bias: &Tensor, mode: &mut Mode) -> Result<Tensor> {
        let (b, s, h) = x.dims3()?;
        let q = self.split_heads(&self.query.forward(x)?, b, s)?;
        let k = self.split_heads(&self.key.forward(x)?, b, s)?;
        let v = self.split_heads(&self.value.forward(x)?, b, s)?;
        let scores = q
            .matmul(&k.t()?.contiguous()?)?
            .affine(1.0 / (self.head_dim as f64).sqrt(), 0.0)?
            .broadcast_add(bias)?;
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let probs = mode.dropout(&probs, self.attn_dropout)?;
        let ctx = probs
            .matmul(&v)?
            .transpose(1, 2)?
            .contiguous()?
            .reshape((b, s, h))?;
        let attn = mode.dropout(&self.attn_out.forward(&ctx)?, self.hidden_dropout)?;
        let a = self.attn_norm.forward(&attn.add(x)?)?;
        let inter = self.intermediate.forward(&a)?.gelu_erf()?;
        let out = mode.dropout(&self.output.forward(&inter)?, self.hidden_dropout)?;
        self.out_norm.forward(&out.add(&a)?)
    }
}

/// Bidirectional transformer encoder producing one vector per token.
pub struct Encoder {
    embeddings: Embeddings,
    layers: Vec<Layer>,
}

impl Encoder {
    /// Builds under `vb`, which should already be scoped to `roberta`.
    pub fn new(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        cfg.validate()?;
        let embeddings = Embeddings::new(cfg, vb.pp("embeddings"))?;
        let layers = (0..cfg.num_hidden_layers)
            .map(|i| Layer::new(cfg, vb.pp("encoder").pp("layer").pp(i)))
            .collect::<Result<_>>()?;
        Ok(Self { embeddings, layers })
    }

    /// `(batch, seq, hidden)`
    pub fn forward(&self, batch: &EncodedBatch, mode: &mut Mode) -> Result<Tensor> {
        let mut x = self.embeddings.forward(batch, mode)?;
        for layer in &self.layers {
            x = layer.forward(&x, &batch.attention_bias, mode)?;
        }
        Ok(x)
    }

    fn word_embeddings(&self) -> &Tensor {
        self.embeddings.word.embeddings()
    }
}

/// Encoder plus a dense/tanh/projection head on the pooled sequence,
/// yielding three independent logits.
pub struct SequenceClassifier {
    encoder: Encoder,
    dense: Linear,
    out_proj: Linear,
    dropout: f64,
    pooling: Pooling,
}

impl SequenceClassifier {
    pub fn new(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        Ok(Self {
            encoder: Encoder::new(cfg, vb.pp("roberta"))?,
            dense: linear(h, h, vb.pp("classifier").pp("dense"))?,
            out_proj: linear(h, NUM_LABELS, vb.pp("classifier").pp("out_proj"))?,
            dropout: cfg.hidden_dropout_prob,
            pooling: cfg.classifier_pooling,
        })
    }

    /// `(batch, 3)` logits.
    pub fn forward(&self, batch: &EncodedBatch, mode: &mut Mode) -> Result<Tensor> {
        let hidden = self.encoder.forward(batch, mode)?;
        let cls = match self.pooling {
            Pooling::First => hidden.i((.., 0, ..))?.contiguous()?,
            Pooling::Mean => {
                let summed = hidden.broadcast_mul(&batch.token_mask)?.sum(1)?;
                summed.broadcast_div(&batch.token_mask.sum(1)?)?
            }
        };
        let x = mode.dropout(&cls, self.dropout)?;
        let x = self.dense.forward(&x)?.tanh()?;
        let x = mode.dropout(&x, self.dropout)?;
        Ok(self.out_proj.forward(&x)?)
    }
}

/// Encoder plus the language-model head used for pretraining. The output
/// projection is tied to the word embeddings.
pub struct MaskedLm {
    encoder: Encoder,
    dense: Linear,
    norm: LayerNorm,
    bias: Tensor,
}

impl MaskedLm {
    pub fn new(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        let head = vb.pp("lm_head");
        Ok(Self {
            encoder: Encoder::new(cfg, vb.pp("roberta"))?,
            dense: linear(h, h, head.pp("dense"))?,
            norm: LayerNorm::new(h, cfg.layer_norm_eps, head.pp("layer_norm"))?,
            bias: head.get(cfg.vocab_size, "bias")?,
        })
    }

    /// Vocabulary logits at the flattened positions `positions` of the
    /// `(batch * seq)` grid: `(positions.len(), vocab)`.
    pub fn forward(&self, batch: &EncodedBatch, positions: &[u32], mode: &mut Mode) -> Result<Tensor> {
        let hidden = self.encoder.forward(batch, mode)?;
        let (b, s, h) = hidden.dims3()?;
        let flat = hidden.reshape((b * s, h))?;
        let idx = Tensor::from_slice(positions, positions.len(), flat.device())?;
        let picked = flat.index_select(&idx, 0)?;
        let x = self.dense.forward(&picked)?.gelu_erf()?;
        let x = self.norm.forward(&x)?;
        let logits = x.matmul(&self.encoder.word_embeddings().t()?)?;
        Ok(logits.broadcast_add(&self.bias)?)
    }
}

fn is_norm_weight(name: &str) -> bool {
    name.ends_with("LayerNorm.weight") || name.ends_with("layer_norm.weight")
}

/// Overwrites every variable deterministically, in name order: layer-norm
/// scales to 1, biases to 0, everything else from N(0, std).
pub fn seeded_init(varmap: &VarMap, seed: u64, std: f64) -> Result<()> {
    let data = varmap.data().lock().expect("varmap lock");
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, std as f32)
        .map_err(|e| ClassifierError::InvalidConfig(format!("initializer_range: {e}")))?;
    for name in names {
        let var = &data[name];
        let shape = var.shape().clone();
        let n = shape.elem_count();
        let values: Vec<f32> = if is_norm_weight(name) {
            vec![1.0; n]
        } else if name.ends_with("bias") {
            vec![0.0; n]
        } else {
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        };
        var.set(&Tensor::from_vec(values, shape, var.device())?)?;
    }
    Ok(())
}

/// Alternate spellings used by older checkpoints.
fn aliases(name: &str) -> Vec<String> {
    let mut out = vec![name.to_string()];
    if let Some(stem) = name.strip_suffix("LayerNorm.weight") {
        out.push(format!("{stem}LayerNorm.gamma"));
    }
    if let Some(stem) = name.strip_suffix("LayerNorm.bias") {
        out.push(format!("{stem}LayerNorm.beta"));
    }
    out
}

/// Copies `tensors` into the variables of `varmap` whose names start with
/// `prefix`. Every such variable must be present with a matching shape.
pub fn load_into(varmap: &VarMap, tensors: &HashMap<String, Tensor>, prefix: &str) -> Result<()> {
    let data = varmap.data().lock().expect("varmap lock");
    for (name, var) in data.iter().filter(|(n, _)| n.starts_with(prefix)) {
        let source = aliases(name)
            .iter()
            .find_map(|a| tensors.get(a))
            .ok_or_else(|| ClassifierError::MissingWeight(name.clone()))?;
        if source.shape() != var.shape() {
            return Err(ClassifierError::InvalidConfig(format!(
                "weight `{name}` has shape {:?}, expected {:?}",
                source.dims(),
                var.dims()
            )));
        }
        var.set(&source.to_dtype(DType::F32)?)?;
    }
    Ok(())
}

/// Detached copies of every variable, keyed by name.
pub fn snapshot(varmap: &VarMap) -> Result<HashMap<String, Tensor>> {
    let data = varmap.data().lock().expect("varmap lock");
    data.iter()
        .map(|(name, var)| Ok((name.clone(), var.as_tensor().copy()?.detach())))
        .collect()
}

/// Rough activation footprint of one training step, in bytes.
pub fn training_bytes(cfg: &EncoderConfig, batch_size: usize, seq_len: usize) -> u64 {
    let (b, s, h) = (batch_size as u64, seq_len as u64, cfg.hidden_size as u64);
    let per_layer = b * s * (10 * h + 2 * cfg.intermediate_size as u64)
        + 3 * b * cfg.num_attention_heads as u64 * s * s;
    // Saved activations plus gradients of the same size, in f32.
    2 * 4 * (per_layer * cfg.num_hidden_layers as u64 + 4 * b * s * h)
}

/// `MemAvailable` from /proc/meminfo, if readable.
pub fn available_memory() -> Option<u64> {
    let info = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = info.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
