use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use async_trait::async_trait;
use chrono::Utc;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use triage_core::baseline::{train_baseline, BaselineArtifact, BaselineConfig};
use triage_core::corpus::{make_example, LanguageDetector};
use triage_core::synthetic::planted_keyword_corpus;
use triage_core::{IssueRecord, Label, PredictError, Prediction, Predictor, RepoRef};
use triage_ingest::GitHubError;
use triage_service::{
    apply_labels, sign, verify_signature, ApplyError, DeliveryStore, RepositoryApi, Service,
};

const SECRET: &[u8] = b"it's a secret to everybody";

/// In-memory issue labels plus a log of every mutation.
#[derive(Default)]
struct FakeApi {
    labels: Mutex<HashMap<String, Vec<String>>>,
    calls: Mutex<Vec<(String, Vec<String>)>>,
    fail_with: Mutex<Option<GitHubError>>,
    delay: Option<Duration>,
    active: AtomicUsize,
    max_active_per_issue: AtomicUsize,
}

impl FakeApi {
    fn calls(&self) -> Vec<(String, Vec<String>)> {
        self.calls.lock().unwrap().clone()
    }
}

#[async_trait]
impl RepositoryApi for FakeApi {
    async fn add_labels(&self, owner: &str, repo: &str, number: u64, labels: &[String]) -> Result<Vec<String>, GitHubError> {
        let key = format!("{owner}/{repo}#{number}");
        self.calls.lock().unwrap().push((key.clone(), labels.to_vec()));
        if let Some(e) = self.fail_with.lock().unwrap().clone() {
            return Err(e);
        }
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_active_per_issue.fetch_max(now, Ordering::SeqCst);
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        self.active.fetch_sub(1, Ordering::SeqCst);
        let mut store = self.labels.lock().unwrap();
        let current = store.entry(key).or_default();
        for l in labels {
            if !current.contains(l) {
                current.push(l.clone());
            }
        }
        Ok(current.clone())
    }
}

fn planted_model() -> Arc<BaselineArtifact> {
    static MODEL: OnceLock<Arc<BaselineArtifact>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(train_baseline(&planted_keyword_corpus(300, 2), &BaselineConfig::default()).unwrap()))
        .clone()
}

/// Fixed probabilities; remembers the texts it saw.
struct Stub {
    probabilities: [f64; 3],
    seen: Mutex<Vec<String>>,
}

impl Stub {
    fn new(probabilities: [f64; 3]) -> Arc<Self> {
        Arc::new(Self {
            probabilities,
            seen: Mutex::new(Vec::new()),
        })
    }
}

impl Predictor for Stub {
    fn predict(&self, text: &str) -> Result<Prediction, PredictError> {
        self.seen.lock().unwrap().push(text.to_string());
        Ok(Prediction::from_probabilities(self.probabilities, 0.5))
    }

    fn model_id(&self) -> String {
        "stub".into()
    }
}

struct Harness {
    url: String,
    api: Arc<FakeApi>,
    service: Arc<Service>,
    http: reqwest::Client,
}

async fn start_with(predictor: Arc<dyn Predictor>, api: FakeApi, deliveries: DeliveryStore) -> Harness {
    let api = Arc::new(api);
    let service = Arc::new(Service::new(predictor, api.clone(), SECRET, deliveries));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let router = service.clone().router();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    Harness {
        url,
        api,
        service,
        http: reqwest::Client::new(),
    }
}

async fn start(predictor: Arc<dyn Predictor>) -> Harness {
    start_with(predictor, FakeApi::default(), DeliveryStore::in_memory(100)).await
}

fn payload(action: &str, number: u64, title: &str, body: Option<&str>) -> Vec<u8> {
    serde_json::to_vec(&json!({
        "action": action,
        "issue": {"number": number, "title": title, "body": body, "labels": []},
        "repository": {"name": "app", "full_name": "octo/app", "owner": {"login": "octo"},
                       "language": "Rust", "stargazers_count": 12},
        "sender": {"login": "reporter"},
    }))
    .unwrap()
}

impl Harness {
    async fn post(&self, event: &str, delivery: &str, body: Vec<u8>, signature: Option<String>) -> (u16, Option<Value>) {
        let mut req = self
            .http
            .post(format!("{}/webhook", self.url))
            .header("X-GitHub-Event", event)
            .header("X-GitHub-Delivery", delivery)
            .header("content-type", "application/json");
        if let Some(sig) = signature {
            req = req.header("X-Hub-Signature-256", sig);
        }
        let resp = req.body(body).send().await.unwrap();
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await.unwrap();
        (status, serde_json::from_slice(&bytes).ok())
    }

    async fn deliver(&self, event: &str, delivery: &str, body: Vec<u8>) -> (u16, Option<Value>) {
        let sig = sign(&body, SECRET);
        self.post(event, delivery, body, Some(sig)).await
    }
}

/// HMAC-SHA256 from the RFC 2104 construction over the plain hash.
fn reference_hmac(key: &[u8], message: &[u8]) -> String {
    let mut block = [0u8; 64];
    if key.len() > 64 {
        block[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let ipad: Vec<u8> = block.iter().map(|b| b ^ 0x36).collect();
    let opad: Vec<u8> = block.iter().map(|b| b ^ 0x5c).collect();
    let inner = Sha256::new().chain_update(&ipad).chain_update(message).finalize();
    let outer = Sha256::new().chain_update(&opad).chain_update(inner).finalize();
    outer.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn signature_matches_reference_hmac() {
    let expected = reference_hmac(b"k", b"x");
    assert_eq!(sign(b"x", b"k"), format!("sha256={expected}"));
    assert!(verify_signature(b"x", Some(&format!("sha256={expected}")), b"k"));
    let long_key = [7u8; 100];
    let body = payload("opened", 1, "t", None);
    assert!(verify_signature(&body, Some(&reference_hmac(&long_key, &body)), &long_key));
    let mut tampered = body.clone();
    tampered[10] ^= 1;
    assert!(!verify_signature(&tampered, Some(&reference_hmac(&long_key, &body)), &long_key));
    assert!(!verify_signature(b"x", None, b"k"));
}

#[tokio::test]
async fn bad_signature_is_rejected_before_parsing() {
    let stub = Stub::new([0.9, 0.9, 0.9]);
    let h = start(stub.clone()).await;
    let body = payload("opened", 1, "app crashes", None);
    let (status, _) = h.post("issues", "d1", body.clone(), Some(sign(&body, b"wrong"))).await;
    assert_eq!(status, 401);
    let (status, _) = h.post("issues", "d1", body, None).await;
    assert_eq!(status, 401);
    // Garbage that would fail to parse still gets 401, not 400.
    let (status, _) = h.post("issues", "d2", b"{not json".to_vec(), Some("sha256=00".into())).await;
    assert_eq!(status, 401);
    assert!(stub.seen.lock().unwrap().is_empty());
    assert!(h.api.calls().is_empty());
    assert!(h.service.deliveries().is_empty());
}

#[tokio::test]
async fn opened_issue_gets_predicted_labels_added() {
    let h = start(planted_model()).await;
    h.api
        .labels
        .lock()
        .unwrap()
        .insert("octo/app#7".into(), vec!["question".into()]);
    let (status, body) = h
        .deliver("issues", "d-open", payload("opened", 7, "App crashes when I click save", Some("")))
        .await;
    assert_eq!(status, 202);
    let body = body.unwrap();
    assert_eq!(body["outcome"], "applied");
    assert!(body["assigned_labels"].as_array().unwrap().contains(&json!("bug")));
    let calls = h.api.calls();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].0, "octo/app#7");
    assert!(calls[0].1.contains(&"bug".to_string()));
    let now = h.api.labels.lock().unwrap()["octo/app#7"].clone();
    assert_eq!(now[0], "question");
    assert!(now.contains(&"bug".to_string()));

    // Redelivery of the same id mutates nothing.
    let (status, _) = h
        .deliver("issues", "d-open", payload("opened", 7, "App crashes when I click save", Some("")))
        .await;
    assert_eq!(status, 204);
    assert_eq!(h.api.calls().len(), 1);
}

#[tokio::test]
async fn non_actionable_events_are_ignored() {
    let stub = Stub::new([0.9, 0.1, 0.1]);
    let h = start(stub.clone()).await;
    for action in ["closed", "edited", "reopened", "labeled"] {
        let (status, _) = h.deliver("issues", action, payload(action, 3, "crash", None)).await;
        assert_eq!(status, 204, "{action}");
    }
    let (status, _) = h.deliver("push", "p1", b"{\"ref\": \"main\"}".to_vec()).await;
    assert_eq!(status, 204);
    let (status, _) = h.deliver("ping", "p2", b"{\"zen\": \"hi\"}".to_vec()).await;
    assert_eq!(status, 204);
    assert!(stub.seen.lock().unwrap().is_empty());
    assert!(h.api.calls().is_empty());
}

#[tokio::test]
async fn nothing_is_applied_below_threshold() {
    let h = start(Stub::new([0.49, 0.1, 0.0])).await;
    let (status, body) = h.deliver("issues", "low", payload("opened", 4, "hello", None)).await;
    assert_eq!(status, 202);
    let body = body.unwrap();
    assert_eq!(body["outcome"], "skipped_no_label");
    assert_eq!(body["assigned_labels"], json!([]));
    assert!(h.api.calls().is_empty());
}

#[tokio::test]
async fn every_label_over_threshold_is_applied() {
    let h = start(Stub::new([0.9, 0.5, 0.2])).await;
    let (_, body) = h.deliver("issues", "multi", payload("opened", 5, "x", None)).await;
    assert_eq!(body.unwrap()["assigned_labels"], json!(["bug", "enhancement"]));
    assert_eq!(h.api.calls()[0].1, ["bug", "enhancement"]);
}

#[tokio::test]
async fn text_matches_corpus_preparation() {
    struct Yes;
    impl LanguageDetector for Yes {
        fn is_english(&self, _: &str) -> bool {
            true
        }
    }
    let stub = Stub::new([0.1; 3]);
    let h = start(stub.clone()).await;
    let cases = [("Crash On Save", Some("Steps:\n1. Open\r\n2. Save")), ("Title Only", None), ("", Some("Body ONLY"))];
    for (i, (title, body)) in cases.iter().enumerate() {
        h.deliver("issues", &format!("t{i}"), payload("opened", 10 + i as u64, title, *body)).await;
        let record = IssueRecord {
            repo: RepoRef::new("octo", "app", "Rust", 12).unwrap(),
            issue_number: 10 + i as u64,
            title: title.to_string(),
            body: body.unwrap_or("").to_string(),
            raw_labels: vec!["bug".into()],
            created_at: Utc::now(),
            is_pull_request: false,
        };
        let expected = make_example(&record, &Yes).unwrap().text;
        assert_eq!(stub.seen.lock().unwrap()[i], expected);
    }
}

#[tokio::test]
async fn failed_label_call_can_be_retried() {
    let api = FakeApi::default();
    *api.fail_with.lock().unwrap() = Some(GitHubError::RateLimited {
        retry_after: Duration::from_secs(30),
    });
    let h = start_with(Stub::new([0.9, 0.0, 0.0]), api, DeliveryStore::in_memory(10)).await;
    let (status, body) = h.deliver("issues", "r1", payload("opened", 8, "x", None)).await;
    assert_eq!(status, 202);
    let body = body.unwrap();
    assert_eq!(body["outcome"], "failed");
    assert_eq!(body["retry_after_secs"], 30);
    assert_eq!(body["assigned_labels"], json!([]));

    *h.api.fail_with.lock().unwrap() = None;
    let (_, body) = h.deliver("issues", "r1", payload("opened", 8, "x", None)).await;
    assert_eq!(body.unwrap()["outcome"], "applied");
    assert_eq!(h.api.calls().len(), 2);
    let (status, _) = h.deliver("issues", "r1", payload("opened", 8, "x", None)).await;
    assert_eq!(status, 204);
    assert_eq!(h.api.calls().len(), 2);
}

#[tokio::test]
async fn revoked_token_fails_distinctly() {
    let api = FakeApi::default();
    *api.fail_with.lock().unwrap() = Some(GitHubError::Authentication);
    let h = start_with(Stub::new([0.9, 0.0, 0.0]), api, DeliveryStore::in_memory(10)).await;
    let (_, body) = h.deliver("issues", "a1", payload("opened", 8, "x", None)).await;
    let body = body.unwrap();
    assert_eq!(body["outcome"], "failed");
    assert!(body["error"].as_str().unwrap().contains("authentication"));
}

#[tokio::test]
async fn malformed_requests_are_bad_requests() {
    let h = start(Stub::new([0.9, 0.0, 0.0])).await;
    let (status, _) = h.deliver("issues", "m1", b"{\"action\": \"opened\"}".to_vec()).await;
    assert_eq!(status, 400);
    let body = payload("opened", 1, "x", None);
    let sig = sign(&body, SECRET);
    let resp = h
        .http
        .post(format!("{}/webhook", h.url))
        .header("X-GitHub-Event", "issues")
        .header("X-Hub-Signature-256", sig)
        .body(body)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    assert!(h.api.calls().is_empty());
}

#[tokio::test]
async fn concurrent_replays_mutate_once() {
    let api = FakeApi {
        delay: Some(Duration::from_millis(50)),
        ..FakeApi::default()
    };
    let h = Arc::new(start_with(Stub::new([0.9, 0.0, 0.0]), api, DeliveryStore::in_memory(10)).await);
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let h = h.clone();
        tasks.push(tokio::spawn(async move { h.deliver("issues", "same", payload("opened", 9, "x", None)).await.0 }));
    }
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    statuses.sort();
    assert_eq!(statuses.iter().filter(|s| **s == 202).count(), 1, "{statuses:?}");
    assert_eq!(h.api.calls().len(), 1);
}

#[tokio::test]
async fn deliveries_for_one_issue_are_serialized() {
    let api = FakeApi {
        delay: Some(Duration::from_millis(30)),
        ..FakeApi::default()
    };
    let h = Arc::new(start_with(Stub::new([0.9, 0.0, 0.0]), api, DeliveryStore::in_memory(100)).await);
    let mut tasks = Vec::new();
    for i in 0..6 {
        let h = h.clone();
        tasks.push(tokio::spawn(async move {
            h.deliver("issues", &format!("s{i}"), payload("opened", 11, "x", None)).await.0
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), 202);
    }
    assert_eq!(h.api.calls().len(), 6);
    assert_eq!(h.api.max_active_per_issue.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn handled_deliveries_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("deliveries.log");
    let stub = Stub::new([0.9, 0.0, 0.0]);
    {
        let h = start_with(stub.clone(), FakeApi::default(), DeliveryStore::open(&log, 100).unwrap()).await;
        let (status, _) = h.deliver("issues", "persist", payload("opened", 12, "x", None)).await;
        assert_eq!(status, 202);
    }
    let h = start_with(stub, FakeApi::default(), DeliveryStore::open(&log, 100).unwrap()).await;
    let (status, _) = h.deliver("issues", "persist", payload("opened", 12, "x", None)).await;
    assert_eq!(status, 204);
    assert!(h.api.calls().is_empty());
}

#[tokio::test]
async fn health_reports_model() {
    let h = start(planted_model()).await;
    let resp = h.http.get(format!("{}/healthz", h.url)).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model"], planted_model().model_id());
    assert!(body["uptime_secs"].is_u64());
}

#[tokio::test]
async fn empty_label_set_is_a_precondition_error() {
    let api = FakeApi::default();
    let repo = RepoRef::new("octo", "app", "Rust", 1).unwrap();
    assert_eq!(apply_labels(&api, &repo, 1, &[]).await, Err(ApplyError::NoLabels));
    assert!(api.calls().is_empty());
    let now = apply_labels(&api, &repo, 1, &[Label::Question]).await.unwrap();
    assert_eq!(now, ["question"]);
}
