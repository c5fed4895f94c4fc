use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use reqwest::header::HeaderMap;

use crate::client::GitHubError;

/// Shared rate-limit budget. Every request waits in [`RateGovernor::acquire`]
/// until any pause ordered by an earlier response has elapsed.
#[derive(Debug)]
pub struct RateGovernor {
    state: Mutex<State>,
    max_wait: Duration,
}

#[derive(Debug, Default)]
struct State {
    remaining: Option<u64>,
    resume_at: Option<Instant>,
    pauses: u64,
}

impl RateGovernor {
    pub fn new(max_wait: Duration) -> Self {
        Self {
            state: Mutex::new(State::default()),
            max_wait,
        }
    }

    pub async fn acquire(&self) -> Result<(), GitHubError> {
        loop {
            let wait = {
                let state = self.state.lock().expect("governor lock");
                state
                    .resume_at
                    .map(|t| t.saturating_duration_since(Instant::now()))
                    .unwrap_or_default()
            };
            if wait.is_zero() {
                return Ok(());
            }
            if wait > self.max_wait {
                return Err(GitHubError::RateLimited { retry_after: wait });
            }
            tokio::time::sleep(wait).await;
        }
    }

    /// Orders every caller to wait `wait` before the next request. Fails
    /// without pausing when `wait` exceeds the configured maximum.
    pub fn pause(&self, wait: Duration) -> Result<(), GitHubError> {
        if wait > self.max_wait {
            return Err(GitHubError::RateLimited { retry_after: wait });
        }
        let mut state = self.state.lock().expect("governor lock");
        let until = Instant::now() + wait;
        state.resume_at = Some(state.resume_at.map_or(until, |t| t.max(until)));
        state.pauses += 1;
        Ok(())
    }

    /// Records the budget reported by a response. An exhausted budget pauses
    /// until the reported reset time.
    pub fn observe(&self, headers: &HeaderMap) {
        let header = |name: &str| {
            headers
                .get(name)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
        };
        let Some(remaining) = header("x-ratelimit-remaining") else {
            return;
        };
        let mut state = self.state.lock().expect("governor lock");
        state.remaining = Some(remaining);
        if remaining == 0 {
            if let Some(reset) = header("x-ratelimit-reset") {
                let now = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                let until = Instant::now() + Duration::from_secs(reset.saturating_sub(now));
                state.resume_at = Some(state.resume_at.map_or(until, |t| t.max(until)));
                state.pauses += 1;
            }
        }
    }

    pub fn remaining(&self) -> Option<u64> {
        self.state.lock().expect("governor lock").remaining
    }

    /// Number of pauses ordered so far.
    pub fn pauses(&self) -> u64 {
        self.state.lock().expect("governor lock").pauses
    }
}
