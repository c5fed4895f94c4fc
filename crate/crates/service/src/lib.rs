//! Webhook receiver that labels newly opened issues with a trained model.
//!
//! `POST /webhook` verifies the `X-Hub-Signature-256` header, and for
//! `issues`/`opened` deliveries predicts labels and adds every label that
//! reaches the decision threshold. Responses: 202 with a [`LabelAssignment`]
//! when the event was processed, 204 for ignored or already handled
//! deliveries, 401 for a bad signature. `GET /healthz` reports the model and
//! uptime.

pub mod api;
pub mod deliveries;
pub mod event;
pub mod server;
pub mod service;
pub mod signature;

pub use api::{apply_labels, ApplyError, RepositoryApi};
pub use deliveries::DeliveryStore;
pub use event::{EventError, LabelAssignment, Outcome, WebhookEvent};
pub use server::{serve, ServeError, ServiceConfig};
pub use service::Service;
pub use signature::{sign, verify_signature};
