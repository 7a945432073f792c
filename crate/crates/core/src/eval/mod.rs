//! Evaluation harness: suppression classification metrics, confusion
//! matrix, age error, confidence comparison and Likert aggregation.

mod io;
mod likert;
mod metrics;
mod report;

use thiserror::Error;

use crate::model::SuppressionCategory;

pub use io::{
    gold_csv, join_gold, parse_gold, parse_predictions, parse_ratings, parse_system,
    predictions_csv, ratings_csv, read_predictions, read_ratings, system_csv, ConfidenceScale,
    GoldRecord, SystemPrediction, HUMAN_PREFIX,
};
pub use likert::{
    criteria_for, likert_summary, quantile, LikertRating, LikertRow, LikertSummary, RatingTarget,
    Stats, ALL_RATERS,
};
pub use metrics::{
    age_mae, classification_metrics, confidence_report, summarize, ClassMetrics,
    ClassificationMetrics, ConfidenceReport, ConfidenceRow, ConfusionMatrix, MetricsSummary,
};
pub use report::{write_outputs, EvalOutputs};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    Empty,
    #[error("{0}")]
    Invalid(String),
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("scenario `{0}` has no human confidence ratings")]
    NoHumanConfidence(String),
    #[error("gold scenario `{0}` has no prediction")]
    MissingPrediction(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Gold and predicted values for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub scenario_id: String,
    pub gold_suppression: SuppressionCategory,
    pub predicted_suppression: SuppressionCategory,
    pub system_confidence: f64,
    /// One value per rater, in `[0, 1]`.
    pub human_confidences: Vec<f64>,
    pub gold_age: u32,
    pub predicted_age: u32,
}

fn unit(value: f64, field: &str) -> Result<f64, String> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(format!("`{field}` must be in [0, 1], got {value}"))
    }
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.scenario_id.trim().is_empty() {
            return Err("scenario_id must not be empty".into());
        }
        unit(self.system_confidence, "system_confidence")?;
        for &h in &self.human_confidences {
            unit(h, "human_confidence")?;
        }
        if self.gold_age == 0 || self.predicted_age == 0 {
            return Err("ages must be positive".into());
        }
        Ok(())
    }

    pub fn is_correct(&self) -> bool {
        self.gold_suppression == self.predicted_suppression
    }
}
