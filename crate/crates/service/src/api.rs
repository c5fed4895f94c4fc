use async_trait::async_trait;
use triage_core::{Label, RepoRef};
use triage_ingest::{GitHubClient, GitHubError};

/// The one repository mutation the service performs.
#[async_trait]
pub trait RepositoryApi: Send + Sync {
    /// Adds `labels` to the issue without touching existing ones; returns the
    /// labels now on the issue.
    async fn add_labels(
        &self,
        owner: &str,
        repo: &str,
        number: u64,
        labels: &[String],
    ) -> Result<Vec<String>, GitHubError>;
}

#[async_trait]
impl RepositoryApi for GitHubClient {
    async fn add_labels(
        &self,
        owner: &str,
        repo: &str,
        number: u64,
        labels: &[String],
    ) -> Result<Vec<String>, GitHubError> {
        GitHubClient::add_labels(self, owner, repo, number, labels).await
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("refusing to apply an empty label set")]
    NoLabels,
    #[error(transparent)]
    Api(#[from] GitHubError),
}

/// Adds `labels` to the issue. Existing labels are kept.
pub async fn apply_labels(
    api: &dyn RepositoryApi,
    repo: &RepoRef,
    issue_number: u64,
    labels: &[Label],
) -> Result<Vec<String>, ApplyError> {
    if labels.is_empty() {
        return Err(ApplyError::NoLabels);
    }
    let names: Vec<String> = labels.iter().map(|l| l.name().to_string()).collect();
    Ok(api.add_labels(&repo.owner, &repo.name, issue_number, &names).await?)
}
