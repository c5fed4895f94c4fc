use whatlang::Lang;

/// Decides whether a text is written in English.
pub trait LanguageDetector: Send + Sync {
    fn is_english(&self, text: &str) -> bool;
}

/// Trigram-profile detector backed by `whatlang`. English iff its top
/// hypothesis is English; empty or undetectable text is not English.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhatlangDetector;

impl LanguageDetector for WhatlangDetector {
    fn is_english(&self, text: &str) -> bool {
        if text.trim().is_empty() {
            return false;
        }
        whatlang::detect(text).is_some_and(|info| info.lang() == Lang::Eng)
    }
}

/// Convenience wrapper over the bundled detector.
pub fn detect_english(text: &str) -> bool {
    WhatlangDetector.is_english(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_sentence() {
        assert!(detect_english("the application crashes when saving files"));
    }

    #[test]
    fn french_sentence() {
        assert!(!detect_english("l'application plante au démarrage"));
    }

    #[test]
    fn empty_is_not_english() {
        assert!(!detect_english(""));
        assert!(!detect_english("   \n"));
    }

    #[test]
    fn deterministic() {
        let text = "Could you add support for exporting reports as CSV?";
        assert_eq!(detect_english(text), detect_english(text));
    }
}
