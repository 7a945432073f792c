//! Classification metrics, age error, confidence comparison and Likert
//! summaries from the shipped evaluation fixtures.

use std::path::Path;

use famlens::eval::{
    criteria_for, likert_summary, read_predictions, read_ratings, summarize, ConfidenceScale,
    RatingTarget,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/eval");
    let records = read_predictions(
        &root.join("predictions_13_of_30.csv"),
        None,
        ConfidenceScale::Unit,
    )?;
    let m = summarize(&records)?;
    let c = &m.classification;
    println!(
        "accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}",
        c.accuracy, c.precision, c.recall, c.f1
    );
    println!("age MAE {:.2}", m.age_mae);
    if let Some(conf) = &m.confidence {
        println!(
            "confidence: system {:.2} vs human {:.2}",
            conf.mean_system, conf.mean_human
        );
    }
    println!("\n{}", c.confusion.to_csv());
    for pc in &c.per_class {
        println!(
            "{:<12} support {}  recall {:.2}",
            pc.category.to_string(),
            pc.support,
            pc.recall
        );
    }

    let summary = likert_summary(&read_ratings(&root.join("ratings.csv"))?)?;
    println!("\nchild feedback, pooled over raters:");
    for criterion in criteria_for(RatingTarget::ChildFeedback) {
        let s = summary
            .pooled(RatingTarget::ChildFeedback, criterion)
            .expect("every criterion is rated");
        println!(
            "  {criterion:<14} mean {:.2}  median {}  IQR [{}, {}]",
            s.mean, s.median, s.q1, s.q3
        );
    }
    Ok(())
}
