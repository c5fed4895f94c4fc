use std::path::PathBuf;
use std::sync::Arc;

use triage_classifier::{ClassifierArtifact, ClassifierError};
use triage_ingest::{ClientConfig, GitHubClient};

use crate::deliveries::{DeliveryStore, DEFAULT_CAPACITY};
use crate::service::Service;

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub artifact_dir: PathBuf,
    pub bind_addr: String,
    pub webhook_secret: String,
    pub github_token: Option<String>,
    /// Where handled delivery ids are kept between restarts.
    pub delivery_log: PathBuf,
    pub api_base_url: String,
}

impl ServiceConfig {
    /// Reads `ARTIFACT_DIR`, `BIND_ADDR`, `WEBHOOK_SECRET`, `GITHUB_TOKEN`,
    /// `DELIVERY_LOG` and `GITHUB_API_URL`. Missing values are left empty or
    /// defaulted; [`ServiceConfig::validate`] reports what is required.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        Self {
            artifact_dir: var("ARTIFACT_DIR").map(PathBuf::from).unwrap_or_default(),
            bind_addr: var("BIND_ADDR").unwrap_or_else(|| DEFAULT_BIND_ADDR.to_string()),
            webhook_secret: var("WEBHOOK_SECRET").unwrap_or_default(),
            github_token: var("GITHUB_TOKEN"),
            delivery_log: var("DELIVERY_LOG")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("deliveries.log")),
            api_base_url: var("GITHUB_API_URL").unwrap_or_else(|| triage_ingest::DEFAULT_BASE_URL.to_string()),
        }
    }

    pub fn validate(&self) -> Result<(), ServeError> {
        if self.artifact_dir.as_os_str().is_empty() {
            return Err(ServeError::Config("no artifact directory (ARTIFACT_DIR or --artifact)".into()));
        }
        if self.webhook_secret.is_empty() {
            return Err(ServeError::Config("WEBHOOK_SECRET is not set".into()));
        }
        if self.bind_addr.parse::<std::net::SocketAddr>().is_err() {
            return Err(ServeError::Config(format!("invalid bind address `{}`", self.bind_addr)));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Artifact(#[from] ClassifierError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Loads the artifact and serves until Ctrl-C.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    config.validate()?;
    if config.github_token.is_none() {
        tracing::warn!("GITHUB_TOKEN is not set; label calls will be rejected");
    }
    let dir = config.artifact_dir.clone();
    let artifact = tokio::task::spawn_blocking(move || ClassifierArtifact::load(&dir))
        .await
        .map_err(|e| ServeError::Config(e.to_string()))??;
    let api = GitHubClient::new(ClientConfig {
        base_url: config.api_base_url.clone(),
        token: config.github_token.clone(),
        ..ClientConfig::default()
    });
    let deliveries = DeliveryStore::open(&config.delivery_log, DEFAULT_CAPACITY)?;
    let service = Arc::new(Service::new(
        Arc::new(artifact),
        Arc::new(api),
        config.webhook_secret.as_bytes(),
        deliveries,
    ));
    let listener = tokio::net::TcpListener::bind(&config.bind_addr).await?;
    tracing::info!(addr = %listener.local_addr()?, model = service.model_version(), "listening");
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
