//! Webhook payloads and the record of what the service did with them.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use triage_core::{Label, RepoRef};

/// The fields of an `issues` delivery the service acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebhookEvent {
    pub delivery_id: String,
    pub event_type: String,
    pub action: String,
    pub repo: RepoRef,
    pub issue_number: u64,
    pub title: String,
    pub body: String,
    pub sender: String,
}

impl WebhookEvent {
    pub fn is_actionable(&self) -> bool {
        self.event_type == "issues" && self.action == "opened"
    }

    /// Parses the JSON body of an `issues` delivery.
    pub fn from_payload(delivery_id: &str, event_type: &str, payload: &[u8]) -> Result<Self, EventError> {
        let p: Payload = serde_json::from_slice(payload).map_err(|e| EventError(e.to_string()))?;
        let repo = RepoRef::new(
            p.repository.owner.login,
            p.repository.name,
            p.repository.language.unwrap_or_default(),
            p.repository.stargazers_count,
        )
        .map_err(|e| EventError(e.to_string()))?;
        Ok(Self {
            delivery_id: delivery_id.to_string(),
            event_type: event_type.to_string(),
            action: p.action,
            repo,
            issue_number: p.issue.number,
            title: p.issue.title.unwrap_or_default(),
            body: p.issue.body.unwrap_or_default(),
            sender: p.sender.map(|s| s.login).unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed issues payload: {0}")]
pub struct EventError(pub String);

#[derive(Deserialize)]
struct Payload {
    action: String,
    issue: IssuePayload,
    repository: RepositoryPayload,
    #[serde(default)]
    sender: Option<Account>,
}

#[derive(Deserialize)]
struct IssuePayload {
    number: u64,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<String>,
}

#[derive(Deserialize)]
struct RepositoryPayload {
    name: String,
    owner: Account,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    stargazers_count: u64,
}

#[derive(Deserialize)]
struct Account {
    login: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    /// Not an `issues/opened` event.
    Skipped,
    /// No label reached the decision threshold.
    SkippedNoLabel,
    /// The delivery was already handled.
    Duplicate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub delivery_id: String,
    pub repo: String,
    pub issue_number: u64,
    /// Non-empty exactly when the outcome is `applied`.
    pub assigned_labels: Vec<Label>,
    pub probabilities: Option<[f64; 3]>,
    pub timestamp: DateTime<Utc>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds the API asked us to wait before retrying, on rate limiting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_secs: Option<u64>,
}

impl LabelAssignment {
    pub(crate) fn new(event: &WebhookEvent, outcome: Outcome) -> Self {
        Self {
            delivery_id: event.delivery_id.clone(),
            repo: event.repo.full_name(),
            issue_number: event.issue_number,
            assigned_labels: Vec::new(),
            probabilities: None,
            timestamp: Utc::now(),
            outcome,
            error: None,
            retry_after_secs: None,
        }
    }
}
