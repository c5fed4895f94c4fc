use std::fmt;

use triage_classifier::ClassifierError;
use triage_core::archive::ArchiveError;
use triage_core::baseline::BaselineError;
use triage_core::corpus::CorpusError;
use triage_core::metrics::MetricsError;
use triage_core::predict::EvaluateError;
use triage_ingest::{FetchError, GitHubError};
use triage_service::ServeError;

/// A failure, classified by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Missing, corrupt or unsuitable input data (exit 3).
    Data(String),
    /// Training or inference failure (exit 4).
    Model(String),
    /// API or network failure (exit 5).
    Network(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
            CliError::Network(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage error", m),
            CliError::Data(m) => ("data error", m),
            CliError::Model(m) => ("model error", m),
            CliError::Network(m) => ("network error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl std::error::Error for CliError {}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        use ClassifierError::*;
        let msg = e.to_string();
        match e {
            InvalidConfig(_) | EmptyText => CliError::Usage(msg),
            EmptyTrainingSet | NoPositives(_) | NotLowercase { .. } | Io { .. } | Format { .. }
            | VersionMismatch { .. } | ChecksumMismatch { .. } | TokenizerMismatch(..)
            | MissingBaseWeights { .. } => CliError::Data(msg),
            _ => CliError::Model(msg),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidRatio(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::Predict(_) => CliError::Model(e.to_string()),
            EvaluateError::Metrics(m) => m.into(),
        }
    }
}

impl From<GitHubError> for CliError {
    fn from(e: GitHubError) -> Self {
        CliError::Network(e.to_string())
    }
}

impl From<FetchError> for CliError {
    fn from(e: FetchError) -> Self {
        match e {
            FetchError::GitHub(g) => g.into(),
            FetchError::Archive(a) => a.into(),
            FetchError::Options(m) => CliError::Usage(m),
        }
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Config(m) => CliError::Usage(m),
            ServeError::Artifact(a) => a.into(),
            ServeError::Io(io) => CliError::Network(io.to_string()),
        }
    }
}
