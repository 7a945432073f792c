use std::fmt::Write as _;

use super::{EvalError, PredictionRecord};
use crate::model::SuppressionCategory;

const K: usize = SuppressionCategory::ALL.len();

/// Counts indexed gold row by predicted column, in fixed category order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (SuppressionCategory, SuppressionCategory)>,
    ) -> Self {
        let mut m = Self::default();
        for (gold, pred) in pairs {
            m.counts[gold.index()][pred.index()] += 1;
        }
        m
    }

    pub fn get(&self, gold: SuppressionCategory, predicted: SuppressionCategory) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn rows(&self) -> &[[u64; K]; K] {
        &self.counts
    }

    pub fn row_sum(&self, gold: SuppressionCategory) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn col_sum(&self, predicted: SuppressionCategory) -> u64 {
        self.counts.iter().map(|r| r[predicted.index()]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Header row and first column carry category names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\predicted");
        for c in SuppressionCategory::ALL {
            out.push(',');
            out.push_str(c.as_str());
        }
        out.push('\n');
        for g in SuppressionCategory::ALL {
            out.push_str(g.as_str());
            for p in SuppressionCategory::ALL {
                let _ = write!(out, ",{}", self.get(g, p));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub category: SuppressionCategory,
    pub support: u64,
    pub predicted: u64,
    pub true_positive: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Weighted (by gold support) and macro averages. Precision of a class
/// that is never predicted, and recall of a class with no support, count
/// as 0; such classes are listed in `zero_predicted` / `zero_support`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMetrics {
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Unweighted mean over classes that occur in gold or predictions.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub zero_support: Vec<SuppressionCategory>,
    pub zero_predicted: Vec<SuppressionCategory>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_metrics(
    records: &[PredictionRecord],
) -> Result<ClassificationMetrics, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let confusion = ConfusionMatrix::from_pairs(
        records
            .iter()
            .map(|r| (r.gold_suppression, r.predicted_suppression)),
    );
    let total = confusion.total();
    let correct = confusion.trace();
    let per_class: Vec<ClassMetrics> = SuppressionCategory::ALL
        .iter()
        .map(|&c| {
            let tp = confusion.get(c, c);
            let support = confusion.row_sum(c);
            let predicted = confusion.col_sum(c);
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                category: c,
                support,
                predicted,
                true_positive: tp,
                precision,
                recall,
                f1,
            }
        })
        .collect();

    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / total as f64
    };
    let present: Vec<&ClassMetrics> = per_class
        .iter()
        .filter(|m| m.support + m.predicted > 0)
        .collect();
    let macro_avg = |f: fn(&ClassMetrics) -> f64| {
        present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64
    };

    Ok(ClassificationMetrics {
        total,
        correct,
        accuracy: ratio(correct, total),
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        macro_precision: macro_avg(|m| m.precision),
        macro_recall: macro_avg(|m| m.recall),
        macro_f1: macro_avg(|m| m.f1),
        zero_support: per_class
            .iter()
            .filter(|m| m.support == 0)
            .map(|m| m.category)
            .collect(),
        zero_predicted: per_class
            .iter()
            .filter(|m| m.predicted == 0)
            .map(|m| m.category)
            .collect(),
        per_class,
        confusion,
    })
}

/// Mean of `|predicted_age - gold_age|`.
pub fn age_mae(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum: u64 = records
        .iter()
        .map(|r| r.predicted_age.abs_diff(r.gold_age) as u64)
        .sum();
    Ok(sum as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRow {
    pub scenario_id: String,
    pub system: f64,
    /// Mean over raters.
    pub human: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceReport {
    pub rows: Vec<ConfidenceRow>,
    pub mean_system: f64,
    pub mean_human: f64,
}

impl ConfidenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario_id,system_c,human_c\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6}", r.scenario_id, r.system, r.human);
        }
        out
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

pub fn confidence_report(records: &[PredictionRecord]) -> Result<ConfidenceReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let rows = records
        .iter()
        .map(|r| {
            if r.human_confidences.is_empty() {
                return Err(EvalError::NoHumanConfidence(r.scenario_id.clone()));
            }
            Ok(ConfidenceRow {
                scenario_id: r.scenario_id.clone(),
                system: r.system_confidence,
                human: mean(r.human_confidences.iter().copied()),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConfidenceReport {
        mean_system: mean(rows.iter().map(|r| r.system)),
        mean_human: mean(rows.iter().map(|r| r.human)),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub classification: ClassificationMetrics,
    pub age_mae: f64,
    /// `None` when some record lacks human confidences.
    pub confidence: Option<ConfidenceReport>,
    pub mean_system_confidence: f64,
}

pub fn summarize(records: &[PredictionRecord]) -> Result<MetricsSummary, EvalError> {
    let classification = classification_metrics(records)?;
    let confidence = match confidence_report(records) {
        Ok(c) => Some(c),
        Err(EvalError::NoHumanConfidence(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsSummary {
        classification,
        age_mae: age_mae(records)?,
        confidence,
        mean_system_confidence: mean(records.iter().map(|r| r.system_confidence)),
    })
}
