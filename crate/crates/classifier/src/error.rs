use std::path::PathBuf;

use triage_core::labels::Label;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{0} has no positive examples in the training set")]
    NoPositives(Label),
    #[error("example {index} is not lowercased")]
    NotLowercase { index: usize },
    #[error("text is empty")]
    EmptyText,
    #[error("base encoder `{name}` not found (looked in {searched:?}); run `triage pretrain` or place a checkpoint there")]
    MissingBaseWeights { name: String, searched: Vec<PathBuf> },
    #[error("base encoder is missing weight `{0}`")]
    MissingWeight(String),
    #[error("out of memory: batch of {batch_size} needs about {needed_mb} MiB, {available_mb} MiB available")]
    OutOfMemory {
        batch_size: usize,
        needed_mb: u64,
        available_mb: u64,
    },
    #[error("artifact format version {found} is newer than supported version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("checksum mismatch for {file}: expected {expected}, found {found}")]
    ChecksumMismatch {
        file: String,
        expected: String,
        found: String,
    },
    #[error("tokenizer does not match the model: {0}")]
    TokenizerMismatch(String),
    #[error("tokenizer: {0}")]
    Tokenizer(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("tensor: {0}")]
    Tensor(#[from] candle_core::Error),
}

impl ClassifierError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| ClassifierError::Io { path, source }
    }
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;
