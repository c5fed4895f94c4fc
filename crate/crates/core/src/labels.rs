//! The three issue categories and the per-example label vector.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the default repository labels handled by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bug,
    Enhancement,
    Question,
}

impl Label {
    /// Slot order used everywhere a label is addressed by position.
    pub const ALL: [Label; 3] = [Label::Bug, Label::Enhancement, Label::Question];

    pub fn name(self) -> &'static str {
        match self {
            Label::Bug => "bug",
            Label::Enhancement => "enhancement",
            Label::Question => "question",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Bug => 0,
            Label::Enhancement => 1,
            Label::Question => 2,
        }
    }

    /// Looks up a label by its canonical (lowercase) name.
    pub fn from_name(name: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary membership for (bug, enhancement, question). Any subset may be set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelVector {
    pub bug: bool,
    pub enhancement: bool,
    pub question: bool,
}

impl LabelVector {
    pub const EMPTY: LabelVector = LabelVector {
        bug: false,
        enhancement: false,
        question: false,
    };

    pub fn new(bug: bool, enhancement: bool, question: bool) -> Self {
        Self {
            bug,
            enhancement,
            question,
        }
    }

    pub fn from_slots(slots: [bool; 3]) -> Self {
        Self::new(slots[0], slots[1], slots[2])
    }

    pub fn from_labels<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let mut v = Self::EMPTY;
        for label in labels {
            v.set(label, true);
        }
        v
    }

    pub fn slots(&self) -> [bool; 3] {
        [self.bug, self.enhancement, self.question]
    }

    pub fn get(&self, label: Label) -> bool {
        self.slots()[label.index()]
    }

    pub fn set(&mut self, label: Label, value: bool) {
        match label {
            Label::Bug => self.bug = value,
            Label::Enhancement => self.enhancement = value,
            Label::Question => self.question = value,
        }
    }

    pub fn count(&self) -> usize {
        self.slots().iter().filter(|s| **s).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Labels that are set, in slot order.
    pub fn labels(&self) -> Vec<Label> {
        Label::ALL.into_iter().filter(|l| self.get(*l)).collect()
    }

    /// Slots as 0.0 / 1.0 targets for a sigmoid head.
    pub fn as_targets(&self) -> [f32; 3] {
        self.slots().map(|s| if s { 1.0 } else { 0.0 })
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [b, e, q] = self.slots().map(u8::from);
        write!(f, "({b},{e},{q})")
    }
}

/// Per-label probabilities from independent sigmoids plus the thresholded labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Ordered (bug, enhancement, question); not constrained to sum to 1.
    pub probabilities: [f64; 3],
    pub labels: LabelVector,
}

impl Prediction {
    /// A slot is set iff its probability is at least `threshold`.
    pub fn from_probabilities(probabilities: [f64; 3], threshold: f64) -> Self {
        let labels = LabelVector::from_slots(probabilities.map(|p| p >= threshold));
        Self {
            probabilities,
            labels,
        }
    }

    pub fn probability(&self, label: Label) -> f64 {
        self.probabilities[label.index()]
    }
}
