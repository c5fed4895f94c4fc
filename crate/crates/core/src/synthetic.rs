//! Seeded synthetic corpora for smoke tests and desk-scale experiments.
//!
//! * [`planted_keyword_corpus`]: each label is signalled by planted keywords
//!   (`crash`/`fail` for bug, `add`/`support` for enhancement, `how`/`why` for
//!   question); about a fifth of the examples carry two or three labels.
//! * [`negation_corpus`]: labels depend on negation context. `"this is not a
//!   bug, it is a feature"` is an enhancement only, while the same words in
//!   the other order are a bug only. A bag-of-words model cannot tell such
//!   pairs apart.

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabeledExample;
use crate::issue::{IssueRecord, RepoRef, SourceRef};
use crate::labels::{Label, LabelVector};

const SUBJECTS: &[&str] = &[
    "the app", "the server", "the editor", "the cli", "the plugin", "the installer", "the dashboard",
    "the parser", "the exporter", "the sync job", "the test runner", "the web ui",
];
const OBJECTS: &[&str] = &[
    "settings page", "config file", "json output", "log viewer", "csv export", "login form",
    "search box", "image upload", "dark theme", "release build", "docker image", "api client",
];
const CONTEXTS: &[&str] = &[
    "on windows", "on linux", "on macos", "after the last update", "with large files",
    "in the nightly build", "behind a proxy", "on version 2.3", "when offline", "in safe mode",
];

const BUG_PHRASES: &[&str] = &[
    "{s} crashes when i open the {o} {c}",
    "{s} fails to load the {o} {c}",
    "crash in {s} while saving the {o}",
    "{s} keeps failing on the {o} {c}",
    "opening the {o} makes {s} crash {c}",
    "the {o} fails with an exception {c}",
];
const ENHANCEMENT_PHRASES: &[&str] = &[
    "please add a {o} to {s}",
    "it would be nice to add support for the {o}",
    "{s} should support the {o} {c}",
    "add an option for the {o} in {s}",
    "could you support exporting the {o} {c}",
    "add a shortcut to the {o}",
];
const QUESTION_PHRASES: &[&str] = &[
    "how do i change the {o} in {s}",
    "why does {s} need the {o} {c}",
    "how can i configure the {o} {c}",
    "why is the {o} stored there",
    "how should i back up the {o}",
    "why does the {o} look different {c}",
];

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .replace("{s}", SUBJECTS.choose(rng).unwrap())
        .replace("{o}", OBJECTS.choose(rng).unwrap())
        .replace("{c}", CONTEXTS.choose(rng).unwrap())
}

fn phrase_for(label: Label, rng: &mut ChaCha8Rng) -> String {
    let pool = match label {
        Label::Bug => BUG_PHRASES,
        Label::Enhancement => ENHANCEMENT_PHRASES,
        Label::Question => QUESTION_PHRASES,
    };
    fill(pool.choose(rng).unwrap(), rng)
}

/// Non-empty label set; `multi_share` of them carry two or more labels.
fn draw_labels(rng: &mut ChaCha8Rng, multi_share: f64) -> Vec<Label> {
    let mut labels = Label::ALL.to_vec();
    labels.shuffle(rng);
    let k = if rng.gen_bool(multi_share) {
        if rng.gen_bool(0.2) {
            3
        } else {
            2
        }
    } else {
        1
    };
    labels.truncate(k);
    labels.sort();
    labels
}

/// Title and body for one planted-keyword issue.
fn planted_issue_text(labels: &[Label], rng: &mut ChaCha8Rng) -> (String, String) {
    let mut phrases: Vec<String> = labels.iter().map(|l| phrase_for(*l, rng)).collect();
    phrases.shuffle(rng);
    let title = phrases.remove(0);
    let mut body: Vec<String> = phrases;
    body.push(format!(
        "this happens with the {} {}",
        OBJECTS.choose(rng).unwrap(),
        CONTEXTS.choose(rng).unwrap()
    ));
    body.shuffle(rng);
    (title, body.join(". "))
}

/// `n` lowercased examples with planted label keywords.
pub fn planted_keyword_corpus(n: usize, seed: u64) -> Vec<LabeledExample> {
    planted_keyword_issues(n, seed)
        .into_iter()
        .map(|issue| {
            let labels = crate::corpus::normalize_labels(&issue.raw_labels);
            LabeledExample {
                text: crate::corpus::issue_text(&issue.title, &issue.body),
                labels,
                source: issue.source(),
                duplicated_from: None,
            }
        })
        .collect()
}

/// The planted-keyword corpus as raw issue records, with mixed-case titles
/// and label names, as the issues endpoint would return them.
pub fn planted_keyword_issues(n: usize, seed: u64) -> Vec<IssueRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let repo = RepoRef::new("synthetic", "planted", "Rust", 0).unwrap();
    (0..n)
        .map(|i| {
            let labels = draw_labels(&mut rng, 0.2);
            let (title, body) = planted_issue_text(&labels, &mut rng);
            let raw_labels = labels
                .iter()
                .map(|l| {
                    if rng.gen_bool(0.3) {
                        capitalize(l.name())
                    } else {
                        l.name().to_string()
                    }
                })
                .collect();
            IssueRecord {
                repo: repo.clone(),
                issue_number: i as u64 + 1,
                title: capitalize(&title),
                body,
                raw_labels,
                created_at: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
                    + chrono::Duration::minutes(i as i64),
                is_pull_request: false,
            }
        })
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

const NOUNS: [(Label, &[&str]); 3] = [
    (Label::Bug, &["bug", "crash", "regression"]),
    (Label::Enhancement, &["feature", "improvement", "proposal"]),
    (Label::Question, &["question", "query", "doubt"]),
];
const NEGATION_FILLERS: &[&str] = &[
    "when running the server",
    "in the latest release",
    "about the config file",
    "for the export command",
    "seen on the build machine",
    "regarding the login page",
];

fn mention(label: Label, negated: bool, rng: &mut ChaCha8Rng) -> String {
    let noun = NOUNS[label.index()].1.choose(rng).unwrap();
    let article = if noun.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    let lead = ["this is", "it is", "i think this is", "clearly this is"].choose(rng).unwrap();
    if negated {
        format!("{lead} not {article} {noun}")
    } else {
        format!("{lead} {article} {noun}")
    }
}

/// `n` lowercased examples whose labels are the non-negated category
/// mentions. Most examples also mention a negated category, so the label
/// depends on which noun the `not` attaches to.
pub fn negation_corpus(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut order = Label::ALL.to_vec();
            order.shuffle(&mut rng);
            let positive_count = if rng.gen_bool(0.2) { 2 } else { 1 };
            let positives = &order[..positive_count];
            let mut negated = Vec::new();
            for label in &order[positive_count..] {
                if rng.gen_bool(0.85) {
                    negated.push(*label);
                }
            }
            let mut clauses = Vec::new();
            for label in positives {
                clauses.push(mention(*label, false, &mut rng));
            }
            for label in &negated {
                clauses.push(mention(*label, true, &mut rng));
            }
            clauses.shuffle(&mut rng);
            let mut text = clauses.join(", ");
            text.push(' ');
            text.push_str(NEGATION_FILLERS.choose(&mut rng).unwrap());
            LabeledExample {
                text,
                labels: LabelVector::from_labels(positives.iter().copied()),
                source: SourceRef::new("synthetic", "negation", i as u64 + 1),
                duplicated_from: None,
            }
        })
        .collect()
}
