use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RatingTarget {
    ChildFeedback,
    AdultFeedback,
    PostDialogue,
    BiasDescription,
}

impl RatingTarget {
    pub const ALL: [RatingTarget; 4] = [
        Self::ChildFeedback,
        Self::AdultFeedback,
        Self::PostDialogue,
        Self::BiasDescription,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ChildFeedback => "child_feedback",
            Self::AdultFeedback => "adult_feedback",
            Self::PostDialogue => "post_dialogue",
            Self::BiasDescription => "bias_description",
        }
    }
}

impl fmt::Display for RatingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RatingTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown rating target `{s}`"))
    }
}

const CHILD: &[&str] = &[
    "empathy",
    "safety",
    "clarity",
    "actionability",
    "self_esteem",
    "culture",
    "dev_fit",
    "overall",
];
const ADULT: &[&str] = &[
    "parent_empathy",
    "non_judgmental",
    "clarity",
    "actionability",
    "bias_awareness",
    "child_respect",
    "context_sensitivity",
    "overall",
];
const POST: &[&str] = &["C-1", "C-2", "C-3", "C-4", "P-1", "P-2", "P-3", "P-4"];
const BIAS: &[&str] = &["appropriateness"];

/// Fixed criterion keys for `target`, in reporting order.
pub fn criteria_for(target: RatingTarget) -> &'static [&'static str] {
    match target {
        RatingTarget::ChildFeedback => CHILD,
        RatingTarget::AdultFeedback => ADULT,
        RatingTarget::PostDialogue => POST,
        RatingTarget::BiasDescription => BIAS,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikertRating {
    pub rater_id: String,
    pub scenario_id: String,
    pub target: RatingTarget,
    pub criterion: String,
    pub score: u8,
}

impl LikertRating {
    pub fn new(
        rater_id: impl Into<String>,
        scenario_id: impl Into<String>,
        target: RatingTarget,
        criterion: impl Into<String>,
        score: i64,
    ) -> Result<Self, String> {
        let rater_id = rater_id.into();
        let scenario_id = scenario_id.into();
        let criterion = criterion.into();
        if rater_id.trim().is_empty() || scenario_id.trim().is_empty() {
            return Err("rater_id and scenario_id must not be empty".into());
        }
        if !criteria_for(target).contains(&criterion.as_str()) {
            return Err(format!(
                "criterion `{criterion}` is not defined for target `{target}`"
            ));
        }
        if !(1..=5).contains(&score) {
            return Err(format!("score must be in [1, 5], got {score}"));
        }
        Ok(Self {
            rater_id,
            scenario_id,
            target,
            criterion,
            score: score as u8,
        })
    }
}

/// Linear-interpolation quantile of sorted data (the common "type 7"
/// definition: position `p * (n - 1)`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Descriptive statistics of one group of scores. Variance is the
/// population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(scores: &[u8]) -> Self {
        let mut v: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            n,
            mean,
            variance,
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            min: v[0],
            max: v[n - 1],
        }
    }
}

/// One summary row. `rater` is `None` for the pooled cross-rater row.
#[derive(Debug, Clone, PartialEq)]
pub struct LikertRow {
    pub target: RatingTarget,
    pub criterion: &'static str,
    pub rater: Option<String>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikertSummary {
    pub rows: Vec<LikertRow>,
}

/// Pooled-row label in CSV and markdown output.
pub const ALL_RATERS: &str = "*";

impl LikertSummary {
    pub fn pooled(&self, target: RatingTarget, criterion: &str) -> Option<&Stats> {
        self.rows
            .iter()
            .find(|r| r.target == target && r.criterion == criterion && r.rater.is_none())
            .map(|r| &r.stats)
    }

    pub fn for_rater(&self, target: RatingTarget, criterion: &str, rater: &str) -> Option<&Stats> {
        self.rows
            .iter()
            .find(|r| {
                r.target == target && r.criterion == criterion && r.rater.as_deref() == Some(rater)
            })
            .map(|r| &r.stats)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,criterion,rater,n,mean,variance,median,q1,q3,min,max\n");
        for r in &self.rows {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.target,
                r.criterion,
                r.rater.as_deref().unwrap_or(ALL_RATERS),
                s.n,
                s.mean,
                s.variance,
                s.median,
                s.q1,
                s.q3,
                s.min,
                s.max
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| target | criterion | rater | n | mean | variance | median | q1 | q3 |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.2} | {:.2} | {:.2} |",
                r.target,
                r.criterion,
                r.rater.as_deref().unwrap_or("all"),
                s.n,
                s.mean,
                s.variance,
                s.median,
                s.q1,
                s.q3
            );
        }
        out
    }
}

/// Per (target, criterion): one row per rater in id order, then the pooled
/// row over all raters. Targets and criteria follow their fixed order;
/// groups without ratings are omitted.
pub fn likert_summary(ratings: &[LikertRating]) -> Result<LikertSummary, EvalError> {
    if ratings.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut groups: BTreeMap<(RatingTarget, usize), BTreeMap<&str, Vec<u8>>> = BTreeMap::new();
    for r in ratings {
        let criterion = criteria_for(r.target)
            .iter()
            .position(|c| *c == r.criterion)
            .ok_or_else(|| {
                EvalError::Invalid(format!(
                    "criterion `{}` is not defined for `{}`",
                    r.criterion, r.target
                ))
            })?;
        if !(1..=5).contains(&r.score) {
            return Err(EvalError::Invalid(format!(
                "score {} out of range",
                r.score
            )));
        }
        groups
            .entry((r.target, criterion))
            .or_default()
            .entry(r.rater_id.as_str())
            .or_default()
            .push(r.score);
    }
    let mut rows = Vec::new();
    for ((target, ci), by_rater) in groups {
        let criterion = criteria_for(target)[ci];
        let mut pooled = Vec::new();
        for (rater, scores) in &by_rater {
            pooled.extend_from_slice(scores);
            rows.push(LikertRow {
                target,
                criterion,
                rater: Some(rater.to_string()),
                stats: Stats::of(scores),
            });
        }
        rows.push(LikertRow {
            target,
            criterion,
            rater: None,
            stats: Stats::of(&pooled),
        });
    }
    Ok(LikertSummary { rows })
}
