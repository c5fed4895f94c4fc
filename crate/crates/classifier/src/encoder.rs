//! Pretrained base encoders: weights, config and paired tokenizer on disk.
//!
//! A base encoder directory holds `config.json` (RoBERTa field names),
//! `tokenizer.json` and `model.safetensors`. A Hugging Face `roberta-base`
//! snapshot has exactly this layout.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};

use crate::config::EncoderConfig;
use crate::error::{ClassifierError, Result};
use crate::tokenizer::TextTokenizer;

pub const CONFIG_FILE: &str = "config.json";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const WEIGHTS_FILE: &str = "model.safetensors";

/// Directory searched for named encoders; overridden by `TRIAGE_ENCODER_HOME`.
pub const DEFAULT_ENCODER_HOME: &str = "encoders";

pub struct BaseEncoder {
    pub name: String,
    pub config: EncoderConfig,
    pub tokenizer: TextTokenizer,
    pub weights: HashMap<String, Tensor>,
}

impl std::fmt::Debug for BaseEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaseEncoder")
            .field("name", &self.name)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl BaseEncoder {
    pub fn load(dir: &Path) -> Result<Self> {
        let config_path = dir.join(CONFIG_FILE);
        let raw = std::fs::read_to_string(&config_path).map_err(ClassifierError::io(&config_path))?;
        let config: EncoderConfig =
            serde_json::from_str(&raw).map_err(|e| ClassifierError::Format {
                path: config_path.clone(),
                reason: e.to_string(),
            })?;
        config.validate()?;
        let tokenizer = TextTokenizer::from_file(&dir.join(TOKENIZER_FILE))?;
        if tokenizer.vocab_size() > config.vocab_size {
            return Err(ClassifierError::TokenizerMismatch(format!(
                "tokenizer has {} entries, embedding table {}",
                tokenizer.vocab_size(),
                config.vocab_size
            )));
        }
        let weights_path = dir.join(WEIGHTS_FILE);
        if !weights_path.exists() {
            return Err(ClassifierError::MissingBaseWeights {
                name: dir.display().to_string(),
                searched: vec![weights_path],
            });
        }
        let weights = candle_core::safetensors::load(&weights_path, &Device::Cpu)?;
        Ok(Self {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string()),
            config,
            tokenizer,
            weights,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(ClassifierError::io(dir))?;
        let config = serde_json::to_string_pretty(&self.config).expect("config serializes");
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, config + "\n").map_err(ClassifierError::io(&path))?;
        let path = dir.join(TOKENIZER_FILE);
        std::fs::write(&path, self.tokenizer.to_json()?).map_err(ClassifierError::io(&path))?;
        candle_core::safetensors::save(&self.weights, dir.join(WEIGHTS_FILE))?;
        Ok(())
    }

    /// Resolves `name_or_path`: an existing directory is loaded directly,
    /// otherwise `<encoder home>/<name>` is tried.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let home = std::env::var_os("TRIAGE_ENCODER_HOME")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_ENCODER_HOME));
        Self::resolve_in(name_or_path, &home)
    }

    pub fn resolve_in(name_or_path: &str, home: &Path) -> Result<Self> {
        let direct = PathBuf::from(name_or_path);
        let candidates = [direct, home.join(name_or_path)];
        for dir in &candidates {
            if dir.join(CONFIG_FILE).is_file() {
                return Self::load(dir);
            }
        }
        Err(ClassifierError::MissingBaseWeights {
            name: name_or_path.to_string(),
            searched: candidates.to_vec(),
        })
    }
}
