use crate::labels::{Label, LabelVector};

/// Maps raw label names to the label vector.
///
/// A slot is set only when some raw label, trimmed and lowercased, is exactly
/// the label's name. Near misses such as `not-a-bug` or `bug-report` are
/// ignored.
pub fn normalize_labels<S: AsRef<str>>(raw_labels: &[S]) -> LabelVector {
    let mut labels = LabelVector::EMPTY;
    for raw in raw_labels {
        if let Some(label) = Label::from_name(&raw.as_ref().trim().to_lowercase()) {
            labels.set(label, true);
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        assert_eq!(
            normalize_labels(&["bug", "enhancement"]),
            LabelVector::new(true, true, false)
        );
        assert_eq!(normalize_labels(&["not-a-bug"]), LabelVector::EMPTY);
        assert_eq!(normalize_labels::<&str>(&[]), LabelVector::EMPTY);
        assert_eq!(
            normalize_labels(&["  Bug ", "QUESTION"]),
            LabelVector::new(true, false, true)
        );
    }

    #[test]
    fn near_misses_ignored() {
        for s in ["bug-report", "type: bug", "bugs", "feature", "questions", "b ug", "enhancement?"] {
            assert_eq!(normalize_labels(&[s]), LabelVector::EMPTY, "{s}");
        }
    }
}
