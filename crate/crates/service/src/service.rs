use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use triage_core::corpus::issue_text;
use triage_core::Predictor;
use triage_ingest::GitHubError;

use crate::api::{apply_labels, ApplyError, RepositoryApi};
use crate::deliveries::DeliveryStore;
use crate::event::{LabelAssignment, Outcome, WebhookEvent};
use crate::signature::{verify_signature, SIGNATURE_HEADER};

pub const EVENT_HEADER: &str = "x-github-event";
pub const DELIVERY_HEADER: &str = "x-github-delivery";

type IssueKey = (String, u64);

pub struct Service {
    predictor: Arc<dyn Predictor>,
    api: Arc<dyn RepositoryApi>,
    secret: Vec<u8>,
    deliveries: DeliveryStore,
    issue_locks: Mutex<HashMap<IssueKey, Arc<tokio::sync::Mutex<()>>>>,
    model_version: String,
    started: Instant,
}

impl Service {
    pub fn new(
        predictor: Arc<dyn Predictor>,
        api: Arc<dyn RepositoryApi>,
        secret: impl Into<Vec<u8>>,
        deliveries: DeliveryStore,
    ) -> Self {
        let model_version = predictor.model_id();
        Self {
            predictor,
            api,
            secret: secret.into(),
            deliveries,
            issue_locks: Mutex::new(HashMap::new()),
            model_version,
            started: Instant::now(),
        }
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn deliveries(&self) -> &DeliveryStore {
        &self.deliveries
    }

    fn issue_lock(&self, key: IssueKey) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.issue_locks.lock().unwrap();
        // Drop locks nobody holds so the map stays small.
        locks.retain(|_, l| Arc::strong_count(l) > 1);
        locks.entry(key).or_default().clone()
    }

    /// Classifies an opened issue and adds the predicted labels. Each
    /// delivery id is handled at most once; a delivery whose label call
    /// failed is released so a redelivery can retry it.
    pub async fn handle_event(&self, event: &WebhookEvent) -> LabelAssignment {
        if !event.is_actionable() {
            return LabelAssignment::new(event, Outcome::Skipped);
        }
        if !self.deliveries.claim(&event.delivery_id) {
            return LabelAssignment::new(event, Outcome::Duplicate);
        }
        let lock = self.issue_lock((event.repo.full_name(), event.issue_number));
        let _guard = lock.lock().await;

        let (assignment, retryable) = self.classify_and_label(event).await;
        if retryable {
            self.deliveries.release(&event.delivery_id);
        } else if let Err(e) = self.deliveries.complete(&event.delivery_id) {
            tracing::error!(delivery = %event.delivery_id, "could not persist delivery id: {e}");
        }
        tracing::info!(
            delivery = %event.delivery_id,
            repo = %assignment.repo,
            issue = assignment.issue_number,
            outcome = ?assignment.outcome,
            labels = ?assignment.assigned_labels,
            "handled issue"
        );
        assignment
    }

    async fn classify_and_label(&self, event: &WebhookEvent) -> (LabelAssignment, bool) {
        let mut out = LabelAssignment::new(event, Outcome::Failed);
        let text = issue_text(&event.title, &event.body);
        let predictor = self.predictor.clone();
        let prediction = match tokio::task::spawn_blocking(move || predictor.predict(&text)).await {
            Ok(Ok(p)) => p,
            Ok(Err(e)) => {
                out.error = Some(format!("prediction failed: {e}"));
                return (out, false);
            }
            Err(e) => {
                out.error = Some(format!("prediction task failed: {e}"));
                return (out, true);
            }
        };
        out.probabilities = Some(prediction.probabilities);
        let labels = prediction.labels.labels();
        if labels.is_empty() {
            out.outcome = Outcome::SkippedNoLabel;
            return (out, false);
        }
        match apply_labels(self.api.as_ref(), &event.repo, event.issue_number, &labels).await {
            Ok(_) => {
                out.outcome = Outcome::Applied;
                out.assigned_labels = labels;
                (out, false)
            }
            Err(e) => {
                if let ApplyError::Api(GitHubError::RateLimited { retry_after }) = &e {
                    out.retry_after_secs = Some(retry_after.as_secs());
                }
                out.error = Some(e.to_string());
                (out, true)
            }
        }
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/webhook", post(webhook))
            .route("/healthz", get(healthz))
            .with_state(self)
    }
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

fn reject(status: StatusCode, message: &str) -> Response {
    (status, Json(serde_json::json!({ "error": message }))).into_response()
}

async fn webhook(State(service): State<Arc<Service>>, headers: HeaderMap, body: Bytes) -> Response {
    // Nothing in the body is looked at before the signature checks out.
    if !verify_signature(&body, header(&headers, SIGNATURE_HEADER), &service.secret) {
        return reject(StatusCode::UNAUTHORIZED, "invalid signature");
    }
    let Some(event_type) = header(&headers, EVENT_HEADER) else {
        return reject(StatusCode::BAD_REQUEST, "missing X-GitHub-Event header");
    };
    let Some(delivery) = header(&headers, DELIVERY_HEADER) else {
        return reject(StatusCode::BAD_REQUEST, "missing X-GitHub-Delivery header");
    };
    if event_type != "issues" {
        return StatusCode::NO_CONTENT.into_response();
    }
    let event = match WebhookEvent::from_payload(delivery, event_type, &body) {
        Ok(event) => event,
        Err(e) => return reject(StatusCode::BAD_REQUEST, &e.to_string()),
    };
    let assignment = service.handle_event(&event).await;
    match assignment.outcome {
        Outcome::Skipped | Outcome::Duplicate => StatusCode::NO_CONTENT.into_response(),
        _ => (StatusCode::ACCEPTED, Json(assignment)).into_response(),
    }
}

async fn healthz(State(service): State<Arc<Service>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model": service.model_version,
        "uptime_secs": service.started.elapsed().as_secs(),
    }))
}
