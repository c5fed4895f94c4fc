//! Per-label multi-label evaluation and side-by-side comparison.
//!
//! Precision is `tp / (tp + fp)`, recall `tp / (tp + fn)`, F1 their harmonic
//! mean, and hamming loss `Σ(fp + fn) / (3 · n)`.
//!
//! Zero denominators: a label that is absent from both truths and
//! predictions (`tp = fp = fn = 0`) agrees perfectly and scores 1 on all three
//! metrics. Otherwise an empty denominator yields 0. Both cases are listed in
//! [`LabelReport::notes`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::labels::{Label, LabelVector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot evaluate an empty prediction set")]
    Empty,
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("reports were computed on different test sets ({left} vs {right}); refusing to compare")]
    FingerprintMismatch { left: String, right: String },
    #[error("reports cover {left} and {right} examples; refusing to compare")]
    SizeMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: Label,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Zero-denominator conventions applied to this label, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LabelReport {
    fn from_counts(label: Label, counts: ConfusionCounts) -> Self {
        let mut notes = Vec::new();
        let ConfusionCounts { tp, fp, fn_, .. } = counts;
        if tp + fp + fn_ == 0 {
            notes.push("no positives predicted or present: scored as perfect agreement".into());
            return Self {
                label,
                counts,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                notes,
            };
        }
        let ratio = |num: u64, den: u64, what: &str, notes: &mut Vec<String>| {
            if den == 0 {
                notes.push(format!("{what} undefined (0/0): reported as 0"));
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, "precision", &mut notes);
        let recall = ratio(tp, tp + fn_, "recall", &mut notes);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            label,
            counts,
            precision,
            recall,
            f1,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub corpus_fingerprint: String,
    pub n_examples: usize,
    /// One entry per label in slot order.
    pub labels: Vec<LabelReport>,
    pub hamming_loss: f64,
    pub macro_f1: f64,
}

impl EvaluationReport {
    pub fn label(&self, label: Label) -> &LabelReport {
        &self.labels[label.index()]
    }

    pub fn with_model(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.corpus_fingerprint = fingerprint.into();
        self
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model: {}  examples: {}", self.model_id, self.n_examples)?;
        writeln!(
            f,
            "{:<12} {:>6} {:>6} {:>6} {:>6} {:>9} {:>7} {:>7}",
            "label", "tp", "fp", "fn", "tn", "precision", "recall", "f1"
        )?;
        for r in &self.labels {
            writeln!(
                f,
                "{:<12} {:>6} {:>6} {:>6} {:>6} {:>9.4} {:>7.4} {:>7.4}",
                r.label.name(),
                r.counts.tp,
                r.counts.fp,
                r.counts.fn_,
                r.counts.tn,
                r.precision,
                r.recall,
                r.f1
            )?;
        }
        writeln!(f, "hamming loss: {:.4}  macro f1: {:.4}", self.hamming_loss, self.macro_f1)
    }
}

/// Scores `predictions` against `truths`, position by position.
pub fn evaluate(
    predictions: &[LabelVector],
    truths: &[LabelVector],
) -> Result<EvaluationReport, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = [ConfusionCounts::default(); 3];
    for (p, t) in predictions.iter().zip(truths) {
        for label in Label::ALL {
            counts[label.index()].record(p.get(label), t.get(label));
        }
    }
    let wrong: u64 = counts.iter().map(|c| c.fp + c.fn_).sum();
    let n = predictions.len();
    let labels: Vec<LabelReport> = Label::ALL
        .into_iter()
        .map(|l| LabelReport::from_counts(l, counts[l.index()]))
        .collect();
    let macro_f1 = labels.iter().map(|r| r.f1).sum::<f64>() / Label::ALL.len() as f64;
    Ok(EvaluationReport {
        model_id: String::new(),
        corpus_fingerprint: String::new(),
        n_examples: n,
        labels,
        hamming_loss: wrong as f64 / (Label::ALL.len() * n) as f64,
        macro_f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Left,
    Right,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// e.g. `bug/f1`, `hamming_loss`
    pub metric: String,
    pub left: f64,
    pub right: f64,
    /// `left - right`
    pub delta: f64,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub left_model: String,
    pub right_model: String,
    pub corpus_fingerprint: String,
    pub n_examples: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "left: {}  right: {}  examples: {}",
            self.left_model, self.right_model, self.n_examples
        )?;
        writeln!(f, "{:<22} {:>8} {:>8} {:>9}  winner", "metric", "left", "right", "delta")?;
        for r in &self.rows {
            let winner = match r.winner {
                Winner::Left => self.left_model.as_str(),
                Winner::Right => self.right_model.as_str(),
                Winner::Tie => "tie",
            };
            writeln!(
                f,
                "{:<22} {:>8.4} {:>8.4} {:>+9.4}  {}",
                r.metric, r.left, r.right, r.delta, winner
            )?;
        }
        Ok(())
    }
}

fn row(metric: String, left: f64, right: f64, higher_is_better: bool) -> ComparisonRow {
    let delta = left - right;
    let winner = if left == right {
        Winner::Tie
    } else if (left > right) == higher_is_better {
        Winner::Left
    } else {
        Winner::Right
    };
    ComparisonRow {
        metric,
        left,
        right,
        delta,
        winner,
    }
}

/// Side-by-side metrics with `left - right` deltas. Both reports must come
/// from the same test set.
pub fn compare_reports(
    left: &EvaluationReport,
    right: &EvaluationReport,
) -> Result<ComparisonTable, MetricsError> {
    if left.corpus_fingerprint != right.corpus_fingerprint {
        return Err(MetricsError::FingerprintMismatch {
            left: left.corpus_fingerprint.clone(),
            right: right.corpus_fingerprint.clone(),
        });
    }
    if left.n_examples != right.n_examples {
        return Err(MetricsError::SizeMismatch {
            left: left.n_examples,
            right: right.n_examples,
        });
    }
    let mut rows = Vec::new();
    for (l, r) in left.labels.iter().zip(&right.labels) {
        let name = l.label.name();
        rows.push(row(format!("{name}/precision"), l.precision, r.precision, true));
        rows.push(row(format!("{name}/recall"), l.recall, r.recall, true));
        rows.push(row(format!("{name}/f1"), l.f1, r.f1, true));
    }
    rows.push(row("macro_f1".into(), left.macro_f1, right.macro_f1, true));
    rows.push(row(
        "hamming_loss".into(),
        left.hamming_loss,
        right.hamming_loss,
        false,
    ));
    Ok(ComparisonTable {
        left_model: left.model_id.clone(),
        right_model: right.model_id.clone(),
        corpus_fingerprint: left.corpus_fingerprint.clone(),
        n_examples: left.n_examples,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(b: u8, e: u8, q: u8) -> LabelVector {
        LabelVector::new(b == 1, e == 1, q == 1)
    }

    #[test]
    fn single_extra_label() {
        let r = evaluate(&[v(1, 1, 0)], &[v(1, 0, 0)]).unwrap();
        assert_eq!(r.hamming_loss, 1.0 / 3.0);
        let bug = r.label(Label::Bug);
        assert_eq!((bug.precision, bug.recall, bug.f1), (1.0, 1.0, 1.0));
        let enh = r.label(Label::Enhancement);
        assert_eq!(enh.precision, 0.0);
        assert_eq!(enh.recall, 0.0);
        assert_eq!(enh.f1, 0.0);
        assert_eq!(r.label(Label::Question).counts.tn, 1);
    }

    #[test]
    fn perfect_predictions() {
        let truths = vec![v(1, 0, 0), v(0, 0, 0), v(1, 1, 0)];
        let r = evaluate(&truths, &truths).unwrap();
        assert_eq!(r.hamming_loss, 0.0);
        for l in &r.labels {
            assert_eq!(l.f1, 1.0);
        }
    }

    #[test]
    fn all_slots_flipped() {
        let truths = vec![v(1, 0, 1), v(0, 1, 0)];
        let preds = vec![v(0, 1, 0), v(1, 0, 1)];
        assert_eq!(evaluate(&preds, &truths).unwrap().hamming_loss, 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(evaluate(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(
            evaluate(&[v(1, 0, 0)], &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn compare_self_is_all_ties() {
        let r = evaluate(&[v(1, 1, 0), v(0, 0, 1)], &[v(1, 0, 0), v(0, 0, 1)])
            .unwrap()
            .with_fingerprint("abc");
        let table = compare_reports(&r, &r).unwrap();
        assert!(table.rows.iter().all(|row| row.delta == 0.0 && row.winner == Winner::Tie));
    }

    #[test]
    fn compare_refuses_other_test_sets() {
        let r = evaluate(&[v(1, 1, 0)], &[v(1, 0, 0)]).unwrap();
        let a = r.clone().with_fingerprint("a");
        let b = r.with_fingerprint("b");
        assert!(matches!(
            compare_reports(&a, &b),
            Err(MetricsError::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn lower_hamming_wins() {
        let truths = [v(1, 0, 0), v(0, 1, 0)];
        let good = evaluate(&truths, &truths).unwrap().with_fingerprint("f");
        let bad = evaluate(&[v(1, 1, 0), v(0, 1, 1)], &truths).unwrap().with_fingerprint("f");
        let table = compare_reports(&good, &bad).unwrap();
        assert_eq!(table.row("hamming_loss").unwrap().winner, Winner::Left);
        assert_eq!(table.row("bug/f1").unwrap().winner, Winner::Tie);
        assert_eq!(table.row("enhancement/precision").unwrap().winner, Winner::Left);
    }
}
