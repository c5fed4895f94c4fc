//! Crawl pipeline: top repositories per language, then all their issues,
//! appended to an archive by a single writer.

use std::collections::HashSet;
use std::path::Path;

use futures::{StreamExt, TryStreamExt};
use triage_core::archive::{write_manifest, ArchiveError, ArchiveWriter, IngestionManifest};
use triage_core::{IssueRecord, RepoRef};

use crate::client::{GitHubClient, GitHubError};

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub languages: Vec<String>,
    pub repos_per_language: u32,
    pub page_size: u32,
    /// Repositories fetched concurrently.
    pub workers: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            languages: Vec::new(),
            repos_per_language: 200,
            page_size: 100,
            workers: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error(transparent)]
    GitHub(#[from] GitHubError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("invalid fetch options: {0}")]
    Options(String),
}

/// Collects every issue of `repo` into memory.
pub async fn fetch_repo_issues(
    client: &GitHubClient,
    repo: &RepoRef,
    page_size: u32,
) -> Result<Vec<IssueRecord>, GitHubError> {
    client.fetch_issues(repo, page_size).try_collect().await
}

/// Runs the crawl and appends to `archive`, writing the manifest next to it.
/// Repositories that disappear mid-crawl are skipped with a warning; any
/// other API error aborts the run after flushing what was written.
pub async fn run_fetch(
    client: &GitHubClient,
    options: &FetchOptions,
    archive: &Path,
) -> Result<IngestionManifest, FetchError> {
    if options.languages.is_empty() {
        return Err(FetchError::Options("no languages given".into()));
    }
    if options.repos_per_language == 0 || options.page_size == 0 || options.workers == 0 {
        return Err(FetchError::Options(
            "repos per language, page size and workers must be positive".into(),
        ));
    }
    let mut repos = Vec::new();
    let mut seen = HashSet::new();
    for language in &options.languages {
        let top = client
            .fetch_top_repositories(language, options.repos_per_language)
            .await?;
        tracing::info!(language = %language, repos = top.len(), "repositories found");
        for repo in top {
            if seen.insert(repo.full_name()) {
                repos.push(repo);
            }
        }
    }

    let mut writer = ArchiveWriter::open(archive)?;
    let mut results = futures::stream::iter(repos.iter())
        .map(|repo| async move { (repo, fetch_repo_issues(client, repo, options.page_size).await) })
        .buffer_unordered(options.workers);
    let mut failure = None;
    while let Some((repo, result)) = results.next().await {
        match result {
            Ok(records) => {
                tracing::info!(repo = %repo.full_name(), issues = records.len(), "fetched");
                for record in &records {
                    writer.write(record)?;
                }
            }
            Err(GitHubError::NotFound(what)) => {
                tracing::warn!(repo = %repo.full_name(), "skipped: {what} not found");
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    drop(results);
    let mut manifest = writer.finish()?;
    manifest.languages = options.languages.clone();
    manifest.repos_per_language = Some(options.repos_per_language);
    write_manifest(&manifest, &IngestionManifest::path_for(archive))?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(manifest),
    }
}
