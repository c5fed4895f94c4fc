//! Client and crawl tests against an in-process fake of the REST API.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use futures::TryStreamExt;
use serde_json::{json, Value};
use triage_core::archive::{read_archive, IngestionManifest};
use triage_core::RepoRef;
use triage_ingest::{run_fetch, ClientConfig, FetchError, FetchOptions, GitHubClient, GitHubError};

type Scripted = (u16, Vec<(&'static str, String)>);

#[derive(Default)]
struct Fake {
    /// `owner/name` -> issues, in API order.
    issues: HashMap<String, Vec<Value>>,
    /// Repos whose issue listing omits the Link header.
    no_link: HashSet<String>,
    /// language -> search items, most starred first.
    search: HashMap<String, Vec<Value>>,
    /// Responses served before the real handler, keyed by path.
    script: Mutex<HashMap<String, VecDeque<Scripted>>>,
    hits: Mutex<Vec<String>>,
    labels: Mutex<HashMap<String, Vec<String>>>,
}

impl Fake {
    fn hits(&self, path: &str) -> usize {
        self.hits.lock().unwrap().iter().filter(|h| *h == path).count()
    }

    fn script(&self, path: &str, responses: Vec<Scripted>) {
        self.script
            .lock()
            .unwrap()
            .insert(path.to_string(), responses.into());
    }
}

fn issue(n: u64) -> Value {
    json!({
        "number": n,
        "title": format!("Issue {n}"),
        "body": format!("body {n}"),
        "labels": [{"name": "bug", "color": "d73a4a"}],
        "created_at": "2020-01-02T03:04:05Z",
        "state": if n % 2 == 0 { "open" } else { "closed" },
    })
}

fn repo_item(owner: &str, name: &str, lang: &str, stars: u64) -> Value {
    json!({
        "name": name,
        "full_name": format!("{owner}/{name}"),
        "owner": {"login": owner},
        "language": lang,
        "stargazers_count": stars,
    })
}

fn page_of<T: Clone>(items: &[T], q: &HashMap<String, String>) -> (Vec<T>, bool) {
    let per_page: usize = q.get("per_page").and_then(|v| v.parse().ok()).unwrap_or(30);
    let page: usize = q.get("page").and_then(|v| v.parse().ok()).unwrap_or(1);
    let start = (page - 1) * per_page;
    let slice = items.iter().skip(start).take(per_page).cloned().collect();
    (slice, start + per_page < items.len())
}

fn message(status: u16, msg: &str) -> Response {
    (StatusCode::from_u16(status).unwrap(), axum::Json(json!({ "message": msg }))).into_response()
}

async fn handle(
    State(fake): State<Arc<Fake>>,
    method: Method,
    uri: Uri,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let path = uri.path().to_string();
    fake.hits.lock().unwrap().push(path.clone());
    if let Some((status, extra)) = fake
        .script
        .lock()
        .unwrap()
        .get_mut(&path)
        .and_then(|queue| queue.pop_front())
    {
        let mut resp = message(status, "scripted");
        for (k, v) in extra {
            resp.headers_mut().insert(k, v.parse().unwrap());
        }
        return resp;
    }
    if headers.get("authorization").and_then(|v| v.to_str().ok()) == Some("Bearer bad") {
        return message(401, "Bad credentials");
    }
    let parts: Vec<&str> = path.trim_start_matches('/').split('/').collect();
    match (method, parts.as_slice()) {
        (Method::GET, ["search", "repositories"]) => {
            let query = q.get("q").cloned().unwrap_or_default();
            let lang = query
                .strip_prefix("language:\"")
                .and_then(|l| l.strip_suffix('"'))
                .unwrap_or_default();
            let Some(items) = fake.search.get(lang) else {
                return message(422, "Validation Failed");
            };
            let (items, _) = page_of(items, &q);
            let mut resp = axum::Json(json!({ "total_count": items.len(), "items": items })).into_response();
            resp.headers_mut().insert("x-ratelimit-remaining", "29".parse().unwrap());
            resp
        }
        (Method::GET, ["repos", owner, name, "issues"]) => {
            let full = format!("{owner}/{name}");
            let Some(all) = fake.issues.get(&full) else {
                return message(404, "Not Found");
            };
            let (items, more) = page_of(all, &q);
            let mut resp = axum::Json(items).into_response();
            if more && !fake.no_link.contains(&full) {
                let next = q.get("page").and_then(|p| p.parse::<u32>().ok()).unwrap_or(1) + 1;
                let link = format!("<http://fake{path}?page={next}>; rel=\"next\"");
                resp.headers_mut().insert("link", link.parse().unwrap());
            }
            resp
        }
        (Method::POST, ["repos", owner, name, "issues", n, "labels"]) => {
            let body: Value = serde_json::from_slice(&body).unwrap();
            let mut store = fake.labels.lock().unwrap();
            let current = store.entry(format!("{owner}/{name}#{n}")).or_default();
            for l in body["labels"].as_array().unwrap() {
                let l = l.as_str().unwrap().to_string();
                if !current.contains(&l) {
                    current.push(l);
                }
            }
            let out: Vec<Value> = current.iter().map(|l| json!({ "name": l })).collect();
            axum::Json(out).into_response()
        }
        _ => message(404, "Not Found"),
    }
}

async fn serve(fake: Fake) -> (Arc<Fake>, String) {
    let fake = Arc::new(fake);
    let app = Router::new().fallback(handle).with_state(fake.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (fake, format!("http://{addr}"))
}

fn client(base_url: &str) -> GitHubClient {
    GitHubClient::new(ClientConfig {
        base_url: base_url.to_string(),
        token: Some("good".into()),
        max_retries: 2,
        initial_backoff: Duration::from_millis(10),
        max_backoff: Duration::from_millis(40),
        max_rate_wait: Duration::from_secs(5),
        timeout: Duration::from_secs(10),
    })
}

fn repo(owner: &str, name: &str) -> RepoRef {
    RepoRef::new(owner, name, "Rust", 1).unwrap()
}

fn with_issues(name: &str, n: u64) -> Fake {
    let mut fake = Fake::default();
    fake.issues.insert(name.to_string(), (1..=n).map(issue).collect());
    fake
}

#[tokio::test]
async fn paginates_without_duplicates() {
    let (fake, url) = serve(with_issues("octo/big", 250)).await;
    let records: Vec<_> = client(&url)
        .fetch_issues(&repo("octo", "big"), 100)
        .try_collect()
        .await
        .unwrap();
    assert_eq!(records.len(), 250);
    let numbers: HashSet<u64> = records.iter().map(|r| r.issue_number).collect();
    assert_eq!(numbers.len(), 250);
    assert_eq!(fake.hits("/repos/octo/big/issues"), 3);
    assert!(records.iter().all(|r| r.repo.full_name() == "octo/big"));
}

#[tokio::test]
async fn paginates_without_link_header() {
    let mut fake = with_issues("octo/plain", 200);
    fake.no_link.insert("octo/plain".into());
    let (fake, url) = serve(fake).await;
    let records: Vec<_> = client(&url)
        .fetch_issues(&repo("octo", "plain"), 100)
        .try_collect()
        .await
        .unwrap();
    assert_eq!(records.len(), 200);
    // Two full pages, then an empty one ends the listing.
    assert_eq!(fake.hits("/repos/octo/plain/issues"), 3);
}

#[tokio::test]
async fn empty_repository_yields_nothing() {
    let (fake, url) = serve(with_issues("octo/empty", 0)).await;
    let records: Vec<_> = client(&url)
        .fetch_issues(&repo("octo", "empty"), 100)
        .try_collect()
        .await
        .unwrap();
    assert!(records.is_empty());
    assert_eq!(fake.hits("/repos/octo/empty/issues"), 1);
}

#[tokio::test]
async fn maps_issue_fields() {
    let mut fake = Fake::default();
    fake.issues.insert(
        "octo/mixed".into(),
        vec![
            json!({"number": 1, "title": "Crash", "body": null, "created_at": "2021-05-06T07:08:09Z"}),
            json!({"number": 2, "title": "PR", "body": "fix", "labels": ["Type: Bug", {"name": "good first issue"}],
                   "created_at": "2021-05-06T07:08:09Z", "pull_request": {"url": "x"}}),
        ],
    );
    let (_, url) = serve(fake).await;
    let page = client(&url)
        .fetch_issue_page(&repo("octo", "mixed"), 1, 100)
        .await
        .unwrap();
    assert!(!page.has_next);
    let [a, b] = page.records.as_slice() else { panic!() };
    assert_eq!((a.title.as_str(), a.body.as_str()), ("Crash", ""));
    assert!(a.raw_labels.is_empty());
    assert!(!a.is_pull_request);
    assert_eq!(a.created_at.to_rfc3339(), "2021-05-06T07:08:09+00:00");
    assert!(b.is_pull_request);
    assert_eq!(b.raw_labels, ["Type: Bug", "good first issue"]);
}

#[tokio::test]
async fn missing_repository_is_not_found() {
    let (_, url) = serve(Fake::default()).await;
    let err = client(&url)
        .fetch_issue_page(&repo("octo", "gone"), 1, 100)
        .await
        .err()
        .unwrap();
    assert!(matches!(err, GitHubError::NotFound(_)), "{err:?}");
}

#[tokio::test]
async fn bad_token_is_authentication_error() {
    let (_, url) = serve(with_issues("octo/big", 3)).await;
    let mut cfg = ClientConfig {
        base_url: url,
        ..ClientConfig::default()
    };
    cfg.token = Some("bad".into());
    let err = GitHubClient::new(cfg)
        .fetch_issue_page(&repo("octo", "big"), 1, 100)
        .await
        .err()
        .unwrap();
    assert_eq!(err, GitHubError::Authentication);
}

#[tokio::test]
async fn rate_limit_pauses_then_resumes() {
    let fake = with_issues("octo/busy", 5);
    fake.script(
        "/repos/octo/busy/issues",
        vec![(403, vec![("retry-after", "1".into()), ("x-ratelimit-remaining", "0".into())])],
    );
    let (fake, url) = serve(fake).await;
    let c = client(&url);
    let t = Instant::now();
    let records: Vec<_> = c
        .fetch_issues(&repo("octo", "busy"), 100)
        .try_collect()
        .await
        .unwrap();
    assert!(t.elapsed() >= Duration::from_millis(950), "{:?}", t.elapsed());
    assert_eq!(records.len(), 5);
    assert_eq!(c.governor().pauses(), 1);
    assert_eq!(fake.hits("/repos/octo/busy/issues"), 2);
}

#[tokio::test]
async fn secondary_limit_via_429_pauses() {
    let fake = with_issues("octo/busy", 2);
    fake.script("/repos/octo/busy/issues", vec![(429, vec![("retry-after", "1".into())])]);
    let (_, url) = serve(fake).await;
    let c = client(&url);
    let page = c.fetch_issue_page(&repo("octo", "busy"), 1, 100).await.unwrap();
    assert_eq!(page.records.len(), 2);
    assert_eq!(c.governor().pauses(), 1);
}

#[tokio::test]
async fn overlong_rate_limit_wait_is_an_error() {
    let fake = with_issues("octo/busy", 1);
    fake.script("/repos/octo/busy/issues", vec![(403, vec![("retry-after", "7200".into())])]);
    let (_, url) = serve(fake).await;
    let err = client(&url)
        .fetch_issue_page(&repo("octo", "busy"), 1, 100)
        .await
        .err()
        .unwrap();
    assert_eq!(
        err,
        GitHubError::RateLimited {
            retry_after: Duration::from_secs(7200)
        }
    );
}

#[tokio::test]
async fn plain_forbidden_is_not_retried() {
    let fake = with_issues("octo/private", 1);
    fake.script("/repos/octo/private/issues", vec![(403, vec![])]);
    let (fake, url) = serve(fake).await;
    let err = client(&url)
        .fetch_issue_page(&repo("octo", "private"), 1, 100)
        .await
        .err()
        .unwrap();
    assert!(matches!(err, GitHubError::Forbidden(_)), "{err:?}");
    assert_eq!(fake.hits("/repos/octo/private/issues"), 1);
}

#[tokio::test]
async fn server_errors_are_retried() {
    let fake = with_issues("octo/flaky", 4);
    fake.script("/repos/octo/flaky/issues", vec![(502, vec![]), (503, vec![])]);
    let (fake, url) = serve(fake).await;
    let page = client(&url)
        .fetch_issue_page(&repo("octo", "flaky"), 1, 100)
        .await
        .unwrap();
    assert_eq!(page.records.len(), 4);
    assert_eq!(fake.hits("/repos/octo/flaky/issues"), 3);
}

#[tokio::test]
async fn persistent_server_errors_give_up() {
    let fake = with_issues("octo/down", 4);
    fake.script("/repos/octo/down/issues", vec![(500, vec![]); 10]);
    let (fake, url) = serve(fake).await;
    let err = client(&url)
        .fetch_issue_page(&repo("octo", "down"), 1, 100)
        .await
        .err()
        .unwrap();
    assert!(matches!(err, GitHubError::Transient { attempts: 3, .. }), "{err:?}");
    assert_eq!(fake.hits("/repos/octo/down/issues"), 3);
}

#[tokio::test]
async fn unreachable_host_is_transient() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let err = client(&url)
        .fetch_issue_page(&repo("octo", "x"), 1, 100)
        .await
        .err()
        .unwrap();
    assert!(matches!(err, GitHubError::Transient { .. }), "{err:?}");
}

fn ranked(lang: &str, n: u64) -> Vec<Value> {
    (0..n)
        .map(|i| repo_item(&format!("o{i}"), &format!("r{i}"), lang, 10_000 - i * 3))
        .collect()
}

#[tokio::test]
async fn top_repositories_are_ranked_and_truncated() {
    let mut fake = Fake::default();
    fake.search.insert("Rust".into(), ranked("Rust", 250));
    let (fake, url) = serve(fake).await;
    let c = client(&url);
    let top = c.fetch_top_repositories("Rust", 150).await.unwrap();
    assert_eq!(top.len(), 150);
    assert!(top.windows(2).all(|w| w[0].star_count > w[1].star_count));
    assert_eq!(top[0].full_name(), "o0/r0");
    assert!(top.iter().all(|r| r.primary_language == "Rust"));
    assert_eq!(fake.hits("/search/repositories"), 2);
    assert_eq!(c.governor().remaining(), Some(29));

    let few = c.fetch_top_repositories("Rust", 3).await.unwrap();
    assert_eq!(few.len(), 3);
}

#[tokio::test]
async fn fewer_repositories_than_requested() {
    let mut fake = Fake::default();
    fake.search.insert("Zig".into(), ranked("Zig", 7));
    let (_, url) = serve(fake).await;
    assert_eq!(client(&url).fetch_top_repositories("Zig", 200).await.unwrap().len(), 7);
}

#[tokio::test]
async fn unknown_language_yields_empty_list() {
    let (_, url) = serve(Fake::default()).await;
    let top = client(&url).fetch_top_repositories("NotALanguage", 10).await.unwrap();
    assert!(top.is_empty());
}

#[tokio::test]
async fn labels_are_added_not_replaced() {
    let (fake, url) = serve(Fake::default()).await;
    fake.labels
        .lock()
        .unwrap()
        .insert("octo/app#9".into(), vec!["triage".into()]);
    let c = client(&url);
    let now = c.add_labels("octo", "app", 9, &["bug".into()]).await.unwrap();
    assert_eq!(now, ["triage", "bug"]);
    let now = c
        .add_labels("octo", "app", 9, &["bug".into(), "question".into()])
        .await
        .unwrap();
    assert_eq!(now, ["triage", "bug", "question"]);
}

#[tokio::test]
async fn crawl_writes_archive_and_manifest() {
    let mut fake = Fake::default();
    fake.search.insert(
        "Rust".into(),
        vec![
            repo_item("a", "one", "Rust", 300),
            repo_item("b", "two", "Rust", 200),
            repo_item("c", "gone", "Rust", 100),
        ],
    );
    // `a/one` also ranks for Go; it must be crawled once.
    fake.search.insert(
        "Go".into(),
        vec![repo_item("a", "one", "Go", 300), repo_item("d", "four", "Go", 50)],
    );
    fake.issues.insert("a/one".into(), (1..=120).map(issue).collect());
    fake.issues.insert("b/two".into(), (1..=3).map(issue).collect());
    fake.issues.insert("d/four".into(), vec![]);
    let (fake, url) = serve(fake).await;

    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("issues.jsonl");
    let options = FetchOptions {
        languages: vec!["Rust".into(), "Go".into()],
        repos_per_language: 3,
        page_size: 50,
        workers: 2,
    };
    let manifest = run_fetch(&client(&url), &options, &archive).await.unwrap();
    assert_eq!(manifest.records_written, 123);
    assert_eq!(manifest.languages, ["Rust", "Go"]);
    assert_eq!(manifest.repos_per_language, Some(3));
    assert_eq!(fake.hits("/repos/a/one/issues"), 3);
    assert_eq!(fake.hits("/repos/c/gone/issues"), 1);

    let records: Vec<_> = read_archive(&archive).unwrap().collect::<Result<_, _>>().unwrap();
    assert_eq!(records.len(), 123);
    let keys: HashSet<(String, u64)> = records
        .iter()
        .map(|r| (r.repo.full_name(), r.issue_number))
        .collect();
    assert_eq!(keys.len(), 123);
    let sidecar = std::fs::read_to_string(IngestionManifest::path_for(&archive)).unwrap();
    let on_disk: IngestionManifest = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(on_disk, manifest);

    // A second run appends nothing new.
    let again = run_fetch(&client(&url), &options, &archive).await.unwrap();
    assert_eq!(again.records_written, 0);
    assert_eq!(again.duplicates_skipped, 123);
}

#[tokio::test]
async fn crawl_stops_on_authentication_failure() {
    let mut fake = Fake::default();
    fake.search.insert("Rust".into(), vec![repo_item("a", "one", "Rust", 3)]);
    let (_, url) = serve(fake).await;
    let dir = tempfile::tempdir().unwrap();
    let options = FetchOptions {
        languages: vec!["Rust".into()],
        ..FetchOptions::default()
    };
    let bad = GitHubClient::new(ClientConfig {
        base_url: url,
        token: Some("bad".into()),
        ..ClientConfig::default()
    });
    let err = run_fetch(&bad, &options, &dir.path().join("a.jsonl")).await.unwrap_err();
    assert!(matches!(err, FetchError::GitHub(GitHubError::Authentication)), "{err:?}");
    let empty = FetchOptions::default();
    assert!(matches!(
        run_fetch(&bad, &empty, &dir.path().join("b.jsonl")).await,
        Err(FetchError::Options(_))
    ));
}
