use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::likert::LikertSummary;
use super::metrics::MetricsSummary;

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutputs {
    pub files: Vec<PathBuf>,
}

fn metrics_csv(m: &MetricsSummary) -> String {
    let c = &m.classification;
    let mut rows: Vec<(&str, String)> = vec![
        ("records", c.total.to_string()),
        ("correct", c.correct.to_string()),
        ("accuracy", format!("{:.6}", c.accuracy)),
        ("precision", format!("{:.6}", c.precision)),
        ("recall", format!("{:.6}", c.recall)),
        ("f1", format!("{:.6}", c.f1)),
        ("macro_precision", format!("{:.6}", c.macro_precision)),
        ("macro_recall", format!("{:.6}", c.macro_recall)),
        ("macro_f1", format!("{:.6}", c.macro_f1)),
        ("age_mae", format!("{:.6}", m.age_mae)),
        (
            "mean_system_confidence",
            format!("{:.6}", m.mean_system_confidence),
        ),
    ];
    if let Some(conf) = &m.confidence {
        rows.push(("mean_human_confidence", format!("{:.6}", conf.mean_human)));
    }
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn per_class_csv(m: &MetricsSummary) -> String {
    let mut out = String::from("category,support,predicted,true_positive,precision,recall,f1\n");
    for c in &m.classification.per_class {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            c.category, c.support, c.predicted, c.true_positive, c.precision, c.recall, c.f1
        );
    }
    out
}

fn report_md(m: &MetricsSummary, likert: Option<&LikertSummary>) -> String {
    let c = &m.classification;
    let mut out = String::from("# Evaluation report\n\n## Suppression classification\n\n");
    let _ = writeln!(
        out,
        "{} of {} scenarios classified correctly.\n",
        c.correct, c.total
    );
    out.push_str("| metric | weighted | macro |\n|---|---|---|\n");
    let _ = writeln!(out, "| accuracy | {:.3} | |", c.accuracy);
    let _ = writeln!(
        out,
        "| precision | {:.3} | {:.3} |",
        c.precision, c.macro_precision
    );
    let _ = writeln!(out, "| recall | {:.3} | {:.3} |", c.recall, c.macro_recall);
    let _ = writeln!(out, "| f1 | {:.3} | {:.3} |", c.f1, c.macro_f1);
    if !c.zero_support.is_empty() {
        let names: Vec<&str> = c.zero_support.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(
            out,
            "\nClasses with no gold support (excluded from weighted averages): {}.",
            names.join(", ")
        );
    }
    if !c.zero_predicted.is_empty() {
        let names: Vec<&str> = c.zero_predicted.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(
            out,
            "\nClasses never predicted (precision counted as 0): {}.",
            names.join(", ")
        );
    }
    out.push_str("\n### Confusion matrix (gold rows, predicted columns)\n\n");
    out.push_str("| gold \\ predicted |");
    for k in crate::model::SuppressionCategory::ALL {
        let _ = write!(out, " {k} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(6));
    out.push('\n');
    for g in crate::model::SuppressionCategory::ALL {
        let _ = write!(out, "| {g} |");
        for p in crate::model::SuppressionCategory::ALL {
            let _ = write!(out, " {} |", c.confusion.get(g, p));
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\n## Attributes\n\nAge mean absolute error: {:.3} years.",
        m.age_mae
    );
    out.push_str("\n## Confidence\n\n");
    let _ = writeln!(
        out,
        "Mean system confidence: {:.3}.",
        m.mean_system_confidence
    );
    match &m.confidence {
        Some(conf) => {
            let _ = writeln!(out, "Mean human confidence: {:.3}.", conf.mean_human);
        }
        None => out.push_str(
            "Human confidence ratings are missing for some scenarios; no comparison was made.\n",
        ),
    }
    if let Some(l) = likert {
        out.push_str("\n## Likert ratings\n\n");
        out.push_str(&l.to_markdown());
    }
    out
}

/// Write `metrics.csv`, `per_class.csv`, `confusion.csv`, `report.md` and,
/// when available, `confidence.csv` and `likert_summary.csv`.
pub fn write_outputs(
    out_dir: &Path,
    m: &MetricsSummary,
    likert: Option<&LikertSummary>,
) -> io::Result<EvalOutputs> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> io::Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    put("metrics.csv", metrics_csv(m))?;
    put("per_class.csv", per_class_csv(m))?;
    put("confusion.csv", m.classification.confusion.to_csv())?;
    if let Some(conf) = &m.confidence {
        put("confidence.csv", conf.to_csv())?;
    }
    if let Some(l) = likert {
        put("likert_summary.csv", l.to_csv())?;
    }
    put("report.md", report_md(m, likert))?;
    Ok(EvalOutputs { files })
}
