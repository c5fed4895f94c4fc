use crate::corpus::{fingerprint, LabeledExample};
use crate::labels::{LabelVector, Prediction};
use crate::metrics::{evaluate, EvaluationReport, MetricsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("text is empty")]
    EmptyText,
    #[error("model failure: {0}")]
    Model(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("item {index}: {source}")]
pub struct BatchPredictError {
    pub index: usize,
    #[source]
    pub source: PredictError,
}

/// Anything that maps issue text to per-label probabilities.
pub trait Predictor: Send + Sync {
    fn predict(&self, text: &str) -> Result<Prediction, PredictError>;

    /// Identifier recorded in evaluation reports.
    fn model_id(&self) -> String;

    /// Element-wise identical to calling [`Predictor::predict`] on each text.
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<Prediction>, BatchPredictError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| self.predict(t).map_err(|source| BatchPredictError { index, source }))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Predict(#[from] BatchPredictError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Predicts every example and scores the result. The report carries the
/// predictor's id and the fingerprint of `examples`.
pub fn evaluate_predictor(
    predictor: &dyn Predictor,
    examples: &[LabeledExample],
) -> Result<EvaluationReport, EvaluateError> {
    let texts: Vec<String> = examples.iter().map(|e| e.text.clone()).collect();
    let predicted: Vec<LabelVector> = predictor
        .predict_batch(&texts)?
        .into_iter()
        .map(|p| p.labels)
        .collect();
    let truths: Vec<LabelVector> = examples.iter().map(|e| e.labels).collect();
    Ok(evaluate(&predicted, &truths)?
        .with_model(predictor.model_id())
        .with_fingerprint(fingerprint(examples)))
}
