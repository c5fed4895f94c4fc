//! Minimal GitHub REST client: repository search, issue listing and label
//! assignment, with rate-limit pauses and bounded retries.

use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Utc};
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, USER_AGENT};
use reqwest::{Method, RequestBuilder, Response, StatusCode};
use serde::Deserialize;
use triage_core::{IssueRecord, RepoRef};

use crate::governor::RateGovernor;

pub const DEFAULT_BASE_URL: &str = "https://api.github.com";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GitHubError {
    #[error("authentication failed: check GITHUB_TOKEN")]
    Authentication,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limit exhausted; retry after {}s", retry_after.as_secs())]
    RateLimited { retry_after: Duration },
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("rejected by the API: {0}")]
    Validation(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Transient { attempts: u32, last: String },
    #[error("unexpected HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("could not decode response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub base_url: String,
    pub token: Option<String>,
    /// Retries after the first attempt for 5xx and network errors.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    /// Longest rate-limit pause taken before giving up with `RateLimited`.
    pub max_rate_wait: Duration,
    pub timeout: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            token: None,
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(16),
            max_rate_wait: Duration::from_secs(3600),
            timeout: Duration::from_secs(30),
        }
    }
}

impl ClientConfig {
    /// Defaults with the token taken from `GITHUB_TOKEN`, if set.
    pub fn from_env() -> Self {
        Self {
            token: std::env::var("GITHUB_TOKEN").ok().filter(|t| !t.is_empty()),
            ..Self::default()
        }
    }
}

#[derive(Clone)]
pub struct GitHubClient {
    http: reqwest::Client,
    config: ClientConfig,
    governor: Arc<RateGovernor>,
}

#[derive(Deserialize)]
struct SearchResponse {
    items: Vec<SearchItem>,
}

#[derive(Deserialize)]
struct SearchItem {
    name: String,
    owner: Owner,
    language: Option<String>,
    stargazers_count: u64,
}

#[derive(Deserialize)]
struct Owner {
    login: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelEntry {
    Object { name: String },
    Name(String),
}

impl LabelEntry {
    fn into_name(self) -> String {
        match self {
            LabelEntry::Object { name } | LabelEntry::Name(name) => name,
        }
    }
}

#[derive(Deserialize)]
struct IssueItem {
    number: u64,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    labels: Vec<LabelEntry>,
    created_at: DateTime<Utc>,
    #[serde(default)]
    pull_request: Option<serde_json::Value>,
}

/// One page of issues plus whether another page follows.
pub struct IssuePage {
    pub records: Vec<IssueRecord>,
    pub has_next: bool,
}

impl GitHubClient {
    pub fn new(config: ClientConfig) -> Self {
        let governor = Arc::new(RateGovernor::new(config.max_rate_wait));
        Self::with_governor(config, governor)
    }

    /// Shares `governor` with other clients so they draw on one budget.
    pub fn with_governor(config: ClientConfig, governor: Arc<RateGovernor>) -> Self {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("http client builds");
        Self {
            http,
            config,
            governor,
        }
    }

    pub fn governor(&self) -> &Arc<RateGovernor> {
        &self.governor
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn request(&self, method: Method, url: &str) -> RequestBuilder {
        let mut req = self
            .http
            .request(method, url)
            .header(ACCEPT, "application/vnd.github+json")
            .header(USER_AGENT, "triage-issue-classifier")
            .header("X-GitHub-Api-Version", "2022-11-28");
        if let Some(token) = &self.config.token {
            req = req.header(AUTHORIZATION, format!("Bearer {token}"));
        }
        req
    }

    /// Sends the request built by `build`, pausing for rate limits and
    /// retrying transient failures with exponential backoff.
    async fn send(&self, what: &str, build: impl Fn() -> RequestBuilder) -> Result<Response, GitHubError> {
        let mut failures = 0u32;
        let mut backoff = self.config.initial_backoff;
        loop {
            self.governor.acquire().await?;
            let last = match build().send().await {
                Ok(resp) => {
                    let status = resp.status();
                    self.governor.observe(resp.headers());
                    if status.is_success() {
                        return Ok(resp);
                    }
                    if let Some(wait) = rate_limit_wait(status, resp.headers()) {
                        tracing::warn!(what, wait_secs = wait.as_secs(), "rate limited, pausing");
                        self.governor.pause(wait)?;
                        continue;
                    }
                    if !status.is_server_error() {
                        return Err(classify(status, what, resp).await);
                    }
                    format!("HTTP {status}")
                }
                Err(e) => e.to_string(),
            };
            failures += 1;
            if failures > self.config.max_retries {
                return Err(GitHubError::Transient {
                    attempts: failures,
                    last,
                });
            }
            tracing::warn!(what, attempt = failures, error = %last, "retrying");
            tokio::time::sleep(backoff).await;
            backoff = (backoff * 2).min(self.config.max_backoff);
        }
    }

    /// Up to `count` repositories whose primary language is `language`,
    /// ordered by descending star count. An unknown language yields `[]`.
    pub async fn fetch_top_repositories(
        &self,
        language: &str,
        count: u32,
    ) -> Result<Vec<RepoRef>, GitHubError> {
        let per_page = count.clamp(1, 100);
        let mut repos: Vec<RepoRef> = Vec::new();
        let mut page = 1u32;
        while repos.len() < count as usize {
            let url = self.url("/search/repositories");
            let query = [
                ("q", format!("language:\"{language}\"")),
                ("sort", "stars".into()),
                ("order", "desc".into()),
                ("per_page", per_page.to_string()),
                ("page", page.to_string()),
            ];
            let resp = match self
                .send("repository search", || self.request(Method::GET, &url).query(&query))
                .await
            {
                Ok(resp) => resp,
                Err(GitHubError::Validation(_)) if page == 1 => return Ok(Vec::new()),
                // Search results stop at 1000 entries.
                Err(GitHubError::Validation(_)) => break,
                Err(e) => return Err(e),
            };
            let body: SearchResponse = decode(resp).await?;
            let n = body.items.len();
            for item in body.items {
                if repos.len() == count as usize {
                    break;
                }
                let language = item.language.unwrap_or_else(|| language.to_string());
                if let Ok(repo) = RepoRef::new(item.owner.login, item.name, language, item.stargazers_count) {
                    repos.push(repo);
                }
            }
            if n < per_page as usize {
                break;
            }
            page += 1;
        }
        repos.sort_by(|a, b| b.star_count.cmp(&a.star_count));
        Ok(repos)
    }

    /// One page of `/repos/{owner}/{repo}/issues?state=all`. Pages are 1-based.
    pub async fn fetch_issue_page(
        &self,
        repo: &RepoRef,
        page: u32,
        page_size: u32,
    ) -> Result<IssuePage, GitHubError> {
        let url = self.url(&format!("/repos/{}/{}/issues", repo.owner, repo.name));
        let query = [
            ("state", "all".to_string()),
            ("per_page", page_size.to_string()),
            ("page", page.to_string()),
        ];
        let what = format!("issues of {}", repo.full_name());
        let resp = self
            .send(&what, || self.request(Method::GET, &url).query(&query))
            .await?;
        let link = resp
            .headers()
            .get(reqwest::header::LINK)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let items: Vec<IssueItem> = decode(resp).await?;
        let has_next = match link {
            Some(link) => has_next_link(&link),
            None => items.len() >= page_size as usize && !items.is_empty(),
        };
        let records = items
            .into_iter()
            .map(|item| IssueRecord {
                repo: repo.clone(),
                issue_number: item.number,
                title: item.title.unwrap_or_default(),
                body: item.body.unwrap_or_default(),
                raw_labels: item.labels.into_iter().map(LabelEntry::into_name).collect(),
                created_at: item.created_at,
                is_pull_request: item.pull_request.is_some(),
            })
            .collect();
        Ok(IssuePage { records, has_next })
    }

    /// Every issue and pull request of `repo`, open and closed.
    pub fn fetch_issues<'a>(
        &'a self,
        repo: &'a RepoRef,
        page_size: u32,
    ) -> impl futures::Stream<Item = Result<IssueRecord, GitHubError>> + 'a {
        use futures::{stream, StreamExt};
        let page_size = page_size.clamp(1, 100);
        stream::try_unfold(Some(1u32), move |page| async move {
            let Some(page) = page else {
                return Ok::<_, GitHubError>(None);
            };
            let fetched = self.fetch_issue_page(repo, page, page_size).await?;
            let next = fetched.has_next.then_some(page + 1);
            Ok(Some((stream::iter(fetched.records.into_iter().map(Ok)), next)))
        })
        .map(|page| match page {
            Ok(records) => records.left_stream(),
            Err(e) => stream::iter(std::iter::once(Err(e))).right_stream(),
        })
        .flatten()
    }

    /// Adds `labels` to an issue, leaving existing labels in place. Returns the
    /// label names now on the issue.
    pub async fn add_labels(
        &self,
        owner: &str,
        repo: &str,
        number: u64,
        labels: &[String],
    ) -> Result<Vec<String>, GitHubError> {
        let url = self.url(&format!("/repos/{owner}/{repo}/issues/{number}/labels"));
        let body = serde_json::json!({ "labels": labels });
        let what = format!("labels of {owner}/{repo}#{number}");
        let resp = self
            .send(&what, || self.request(Method::POST, &url).json(&body))
            .await?;
        let labels: Vec<LabelEntry> = decode(resp).await?;
        Ok(labels.into_iter().map(LabelEntry::into_name).collect())
    }
}

async fn decode<T: serde::de::DeserializeOwned>(resp: Response) -> Result<T, GitHubError> {
    let bytes = resp
        .bytes()
        .await
        .map_err(|e| GitHubError::Decode(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| GitHubError::Decode(e.to_string()))
}

async fn classify(status: StatusCode, what: &str, resp: Response) -> GitHubError {
    let body = resp.text().await.unwrap_or_default();
    let message = serde_json::from_str::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| v.get("message").and_then(|m| m.as_str()).map(str::to_string))
        .unwrap_or_else(|| body.clone());
    match status {
        StatusCode::UNAUTHORIZED => GitHubError::Authentication,
        StatusCode::NOT_FOUND => GitHubError::NotFound(what.to_string()),
        StatusCode::FORBIDDEN => GitHubError::Forbidden(message),
        StatusCode::UNPROCESSABLE_ENTITY => GitHubError::Validation(message),
        _ => GitHubError::Http {
            status: status.as_u16(),
            body: message,
        },
    }
}

/// Pause demanded by a 403/429 response, if it is a rate-limit response.
fn rate_limit_wait(status: StatusCode, headers: &HeaderMap) -> Option<Duration> {
    if status != StatusCode::FORBIDDEN && status != StatusCode::TOO_MANY_REQUESTS {
        return None;
    }
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok());
    if let Some(secs) = header("retry-after").and_then(|v| v.trim().parse::<u64>().ok()) {
        return Some(Duration::from_secs(secs));
    }
    let exhausted = header("x-ratelimit-remaining") == Some("0");
    if exhausted || status == StatusCode::TOO_MANY_REQUESTS {
        let reset = header("x-ratelimit-reset").and_then(|v| v.trim().parse::<u64>().ok());
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        return Some(Duration::from_secs(
            reset.map(|r| r.saturating_sub(now)).unwrap_or(60).max(1),
        ));
    }
    None
}

fn has_next_link(link: &str) -> bool {
    link.split(',')
        .any(|part| part.split(';').skip(1).any(|p| p.trim() == "rel=\"next\""))
}
