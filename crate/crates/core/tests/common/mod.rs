#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use famlens::eval::{LikertRating, PredictionRecord, RatingTarget};
use famlens::{
    AttributeReport, Audience, BiasReport, DetectionSource, Gender, SituationReport,
    SuppressionCategory, SuppressionReport,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use sha2::{Digest, Sha256};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(rel: &str) -> PathBuf {
    crate_dir().join("fixtures").join(rel)
}

/// Scripted config with absolute fixture path and the given cap.
pub fn scripted_config(dir: &Path, cap: usize) -> PathBuf {
    let text = format!(
        "backend = \"scripted\"\nfixtures_dir = {:?}\nembedding = \"deterministic\"\nlanguage = \"en\"\nconcurrency_cap = {cap}\nturn_count = 6\n",
        fixture("scripted").display().to_string()
    );
    let path = dir.join(format!("scripted-cap{cap}.toml"));
    fs::write(&path, text).unwrap();
    path
}

pub fn famlens(args: &[&str]) -> i32 {
    famlens::cli::run(std::iter::once("famlens").chain(args.iter().copied()))
}

/// generate, analyze, feedback, simulate, eval under `root`.
pub fn run_pipeline(config: &Path, root: &Path) -> Result<(), String> {
    let c = config.to_str().unwrap();
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let metas = fixture("metas");
    let steps: Vec<Vec<String>> = vec![
        vec![
            "generate".into(),
            "--config".into(),
            c.into(),
            "--metas".into(),
            metas.to_str().unwrap().into(),
            "--out".into(),
            p("corpus"),
        ],
        vec![
            "analyze".into(),
            "--config".into(),
            c.into(),
            "--corpus".into(),
            p("corpus"),
            "--out".into(),
            p("analysis"),
        ],
        vec![
            "feedback".into(),
            "--config".into(),
            c.into(),
            "--corpus".into(),
            p("corpus"),
            "--reports".into(),
            p("analysis"),
            "--out".into(),
            p("feedback"),
            "--ranking".into(),
        ],
        vec![
            "simulate".into(),
            "--config".into(),
            c.into(),
            "--corpus".into(),
            p("corpus"),
            "--feedback".into(),
            p("feedback"),
            "--out".into(),
            p("post"),
        ],
        vec![
            "eval".into(),
            "--predictions".into(),
            root.join("analysis/predictions.csv")
                .to_str()
                .unwrap()
                .into(),
            "--gold".into(),
            root.join("analysis/gold.csv").to_str().unwrap().into(),
            "--out".into(),
            p("eval"),
        ],
    ];
    for step in steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let code = famlens(&args);
        if code != 0 {
            return Err(format!("`{}` exited {code}", step[0]));
        }
    }
    Ok(())
}

/// Relative path to SHA-256 of every file below `root`.
pub fn dir_digest(root: &Path) -> BTreeMap<String, String> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&path).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn reports(id: &str, child_text: &str, adult_text: &str) -> (SituationReport, SituationReport) {
    let attrs = AttributeReport::new(Gender::Female, 9, "third grader").unwrap();
    let sup = SuppressionReport::new(3, SuppressionCategory::Fear, "goes quiet", 0.8).unwrap();
    let bias = BiasReport::new("expects top grades", 0.8).unwrap();
    (
        SituationReport::new(
            Audience::Child,
            id,
            child_text,
            DetectionSource::Suppression(sup),
            attrs.clone(),
        )
        .unwrap(),
        SituationReport::new(
            Audience::Adult,
            id,
            adult_text,
            DetectionSource::Bias(bias),
            attrs,
        )
        .unwrap(),
    )
}

pub fn sample<T: std::fmt::Debug>(runner: &mut TestRunner, s: impl Strategy<Value = T>) -> T {
    s.new_tree(runner).unwrap().current()
}

pub fn category() -> impl Strategy<Value = SuppressionCategory> {
    prop::sample::select(SuppressionCategory::ALL.to_vec())
}

pub fn record(i: usize) -> impl Strategy<Value = PredictionRecord> {
    (
        category(),
        category(),
        0.0..=1.0f64,
        prop::collection::vec(0.0..=1.0f64, 1..4),
        1u32..18,
        1u32..18,
    )
        .prop_map(move |(g, p, c, h, ga, pa)| PredictionRecord {
            scenario_id: format!("s{i:03}"),
            gold_suppression: g,
            predicted_suppression: p,
            system_confidence: c,
            human_confidences: h,
            gold_age: ga,
            predicted_age: pa,
        })
}

pub fn records() -> impl Strategy<Value = Vec<PredictionRecord>> {
    (1usize..60).prop_flat_map(|n| (0..n).map(record).collect::<Vec<_>>())
}

pub fn ratings() -> impl Strategy<Value = Vec<LikertRating>> {
    let one = (
        0usize..3,
        0usize..5,
        prop::sample::select(vec![
            RatingTarget::ChildFeedback,
            RatingTarget::AdultFeedback,
            RatingTarget::PostDialogue,
        ]),
        0usize..8,
        1i64..=5,
    )
        .prop_map(|(r, s, t, k, score)| {
            let criterion = famlens::eval::criteria_for(t)[k];
            LikertRating::new(format!("r{r}"), format!("s{s}"), t, criterion, score).unwrap()
        });
    prop::collection::vec(one, 1..120)
}

/// Brute-force reference implementations, written without the confusion
/// matrix or the library's helpers.
pub mod oracle {
    use super::*;

    pub struct Classification {
        pub correct: u64,
        pub accuracy: f64,
        pub precision: f64,
        pub recall: f64,
        pub f1: f64,
        pub macro_f1: f64,
        pub cells: Vec<Vec<u64>>,
    }

    fn class_prf(records: &[PredictionRecord], c: SuppressionCategory) -> (f64, f64, f64) {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for r in records {
            match (r.gold_suppression == c, r.predicted_suppression == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        (p, r, f)
    }

    pub fn classification(records: &[PredictionRecord]) -> Classification {
        let n = records.len() as f64;
        let correct = records
            .iter()
            .filter(|r| r.gold_suppression == r.predicted_suppression)
            .count() as u64;
        // Support-weighted average as a per-record mean of the gold class's score.
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        for rec in records {
            let (cp, cr, cf) = class_prf(records, rec.gold_suppression);
            p += cp;
            r += cr;
            f += cf;
        }
        let present: Vec<SuppressionCategory> = SuppressionCategory::ALL
            .into_iter()
            .filter(|&c| {
                records
                    .iter()
                    .any(|x| x.gold_suppression == c || x.predicted_suppression == c)
            })
            .collect();
        let macro_f1 = present
            .iter()
            .map(|&c| class_prf(records, c).2)
            .sum::<f64>()
            / present.len() as f64;
        let cells = SuppressionCategory::ALL
            .iter()
            .map(|&g| {
                SuppressionCategory::ALL
                    .iter()
                    .map(|&q| {
                        records
                            .iter()
                            .filter(|x| x.gold_suppression == g && x.predicted_suppression == q)
                            .count() as u64
                    })
                    .collect()
            })
            .collect();
        Classification {
            correct,
            accuracy: correct as f64 / n,
            precision: p / n,
            recall: r / n,
            f1: f / n,
            macro_f1,
            cells,
        }
    }

    pub fn age_mae(records: &[PredictionRecord]) -> f64 {
        let total: f64 = records
            .iter()
            .map(|r| (r.predicted_age as f64 - r.gold_age as f64).abs())
            .sum();
        total / records.len() as f64
    }

    /// (mean system, mean human, per-row human).
    pub fn confidence(records: &[PredictionRecord]) -> (f64, f64, Vec<f64>) {
        let rows: Vec<f64> = records
            .iter()
            .map(|r| r.human_confidences.iter().sum::<f64>() / r.human_confidences.len() as f64)
            .collect();
        let n = records.len() as f64;
        (
            records.iter().map(|r| r.system_confidence).sum::<f64>() / n,
            rows.iter().sum::<f64>() / n,
            rows,
        )
    }

    pub struct Group {
        pub n: usize,
        pub mean: f64,
        pub variance: f64,
        pub median: f64,
        pub q1: f64,
        pub q3: f64,
    }

    fn pick(sorted: &[u8], num: usize, den: usize) -> f64 {
        // Position num/den * (n - 1) in exact rational arithmetic.
        let scaled = num * (sorted.len() - 1);
        let (lo, rem) = (scaled / den, scaled % den);
        let a = sorted[lo] as f64;
        if rem == 0 {
            a
        } else {
            a + (rem as f64 / den as f64) * (sorted[lo + 1] as f64 - a)
        }
    }

    pub fn group(scores: &[u8]) -> Group {
        let mut s = scores.to_vec();
        s.sort();
        let n = s.len();
        let mean = s.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        let sq = s.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / n as f64;
        Group {
            n,
            mean,
            variance: sq - mean * mean,
            median: pick(&s, 1, 2),
            q1: pick(&s, 1, 4),
            q3: pick(&s, 3, 4),
        }
    }

    /// Scores for one (target, criterion, optional rater) cell by full scan.
    pub fn scores(
        ratings: &[LikertRating],
        target: RatingTarget,
        criterion: &str,
        rater: Option<&str>,
    ) -> Vec<u8> {
        ratings
            .iter()
            .filter(|r| {
                r.target == target
                    && r.criterion == criterion
                    && rater.is_none_or(|x| r.rater_id == x)
            })
            .map(|r| r.score)
            .collect()
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
