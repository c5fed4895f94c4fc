use serde::{Deserialize, Serialize};

use super::language::LanguageDetector;
use super::normalize::normalize_labels;
use crate::issue::{IssueRecord, SourceRef};
use crate::labels::LabelVector;

/// A preprocessed, labeled issue ready for training or evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Lowercased `title + "\n" + body`.
    pub text: String,
    pub labels: LabelVector,
    pub source: SourceRef,
    /// Set only on copies made by oversampling; points at the original.
    pub duplicated_from: Option<SourceRef>,
}

impl LabeledExample {
    pub fn is_duplicate(&self) -> bool {
        self.duplicated_from.is_some()
    }
}

/// Title and body joined by a single newline; an empty part is dropped
/// along with its separator. Case is preserved.
pub fn raw_issue_text(title: &str, body: &str) -> String {
    match (title.is_empty(), body.is_empty()) {
        (_, true) => title.to_string(),
        (true, false) => body.to_string(),
        (false, false) => format!("{title}\n{body}"),
    }
}

/// The exact text a model sees for an issue. Shared by corpus preparation and
/// the webhook service.
pub fn issue_text(title: &str, body: &str) -> String {
    raw_issue_text(title, body).to_lowercase()
}

/// Builds a training example from a raw issue, or `None` when the record is
/// a pull request, is not English, or carries none of the three labels.
/// Language detection runs on the raw text, before lowercasing.
pub fn make_example(issue: &IssueRecord, detector: &dyn LanguageDetector) -> Option<LabeledExample> {
    if issue.is_pull_request {
        return None;
    }
    let labels = normalize_labels(&issue.raw_labels);
    if labels.is_empty() {
        return None;
    }
    let raw = raw_issue_text(&issue.title, &issue.body);
    if !detector.is_english(&raw) {
        return None;
    }
    Some(LabeledExample {
        text: raw.to_lowercase(),
        labels,
        source: issue.source(),
        duplicated_from: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WhatlangDetector;
    use crate::issue::RepoRef;
    use chrono::Utc;

    fn issue(title: &str, body: &str, labels: &[&str]) -> IssueRecord {
        IssueRecord {
            repo: RepoRef::new("arduino", "ArduinoCore", "C++", 100).unwrap(),
            issue_number: 7,
            title: title.into(),
            body: body.into(),
            raw_labels: labels.iter().map(|s| s.to_string()).collect(),
            created_at: Utc::now(),
            is_pull_request: false,
        }
    }

    #[test]
    fn multi_labeled_issue_yields_one_example() {
        let i = issue(
            "USBhost: additional functions for keyboard appreciated",
            "for USBhost it would be fine to have additional functions to read the USB keyboard: kbhit() getch() getche() getchar() gets() scanf()",
            &["bug", "enhancement"],
        );
        let ex = make_example(&i, &WhatlangDetector).unwrap();
        assert_eq!(ex.labels, LabelVector::new(true, true, false));
        assert!(ex.text.starts_with("usbhost: additional functions"));
        assert_eq!(ex.text, ex.text.to_lowercase());
    }

    #[test]
    fn out_of_scope_label_dropped() {
        let i = issue("The build fails on Windows", "Linker error when building the project.", &["wontfix"]);
        assert!(make_example(&i, &WhatlangDetector).is_none());
    }

    #[test]
    fn empty_body_uses_title_only() {
        let i = issue("How do I configure the proxy settings for this tool?", "", &["question"]);
        let ex = make_example(&i, &WhatlangDetector).unwrap();
        assert_eq!(ex.text, "how do i configure the proxy settings for this tool?");
    }

    #[test]
    fn pull_requests_dropped() {
        let mut i = issue("Fix crash when saving files", "This fixes the crash.", &["bug"]);
        i.is_pull_request = true;
        assert!(make_example(&i, &WhatlangDetector).is_none());
    }

    #[test]
    fn non_english_dropped() {
        let i = issue(
            "L'application plante au démarrage",
            "Quand je lance l'application, elle plante immédiatement avec une erreur.",
            &["bug"],
        );
        assert!(make_example(&i, &WhatlangDetector).is_none());
    }

    #[test]
    fn separator_is_single_newline() {
        assert_eq!(raw_issue_text("Title", "Body"), "Title\nBody");
        assert_eq!(raw_issue_text("", "Body"), "Body");
        assert_eq!(issue_text("A", "B"), "a\nb");
    }
}
