//! Crawls the GitHub REST API for popular repositories and their issues.

pub mod client;
pub mod fetch;
pub mod governor;

pub use client::{ClientConfig, GitHubClient, GitHubError, IssuePage, DEFAULT_BASE_URL};
pub use fetch::{fetch_repo_issues, run_fetch, FetchError, FetchOptions};
pub use governor::RateGovernor;
