//! Raw issue records as harvested from the hosting platform.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// A repository together with the popularity data used to rank it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RepoRef {
    pub owner: String,
    pub name: String,
    pub primary_language: String,
    pub star_count: u64,
}

impl RepoRef {
    /// Fails when owner or name is empty.
    pub fn new(
        owner: impl Into<String>,
        name: impl Into<String>,
        primary_language: impl Into<String>,
        star_count: u64,
    ) -> Result<Self, InvalidRepo> {
        let repo = Self {
            owner: owner.into(),
            name: name.into(),
            primary_language: primary_language.into(),
            star_count,
        };
        repo.validate()?;
        Ok(repo)
    }

    pub fn validate(&self) -> Result<(), InvalidRepo> {
        if self.owner.trim().is_empty() || self.name.trim().is_empty() {
            return Err(InvalidRepo(format!("{}/{}", self.owner, self.name)));
        }
        Ok(())
    }

    /// `owner/name`
    pub fn full_name(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("repository reference `{0}` needs a non-empty owner and name")]
pub struct InvalidRepo(pub String);

/// One issue (or pull request) exactly as listed by the issues endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub repo: RepoRef,
    pub issue_number: u64,
    pub title: String,
    pub body: String,
    /// Label names in the order and casing the API returned them.
    pub raw_labels: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub is_pull_request: bool,
}

impl IssueRecord {
    pub fn source(&self) -> SourceRef {
        SourceRef {
            owner: self.repo.owner.clone(),
            repo: self.repo.name.clone(),
            number: self.issue_number,
        }
    }
}

/// Identity of an issue: `(owner, repo, number)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub owner: String,
    pub repo: String,
    pub number: u64,
}

impl SourceRef {
    pub fn new(owner: impl Into<String>, repo: impl Into<String>, number: u64) -> Self {
        Self {
            owner: owner.into(),
            repo: repo.into(),
            number,
        }
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.owner, self.repo, self.number)
    }
}

impl FromStr for SourceRef {
    type Err = String;

    /// Parses the `owner/repo#number` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (path, number) = s
            .rsplit_once('#')
            .ok_or_else(|| format!("`{s}` is not of the form owner/repo#number"))?;
        let (owner, repo) = path
            .split_once('/')
            .ok_or_else(|| format!("`{s}` is not of the form owner/repo#number"))?;
        let number = number
            .parse()
            .map_err(|_| format!("`{number}` is not an issue number"))?;
        if owner.is_empty() || repo.is_empty() {
            return Err(format!("`{s}` has an empty owner or repo"));
        }
        Ok(SourceRef::new(owner, repo, number))
    }
}
