use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::likert::{LikertRating, RatingTarget};
use super::{EvalError, PredictionRecord};
use crate::model::SuppressionCategory;

pub const HUMAN_PREFIX: &str = "human_confidence_";
const RATINGS_HEADER: [&str; 5] = ["rater_id", "scenario_id", "target", "criterion", "score"];
const SYSTEM_HEADER: [&str; 5] = [
    "scenario_id",
    "predicted_suppression",
    "predicted_intensity",
    "system_confidence",
    "predicted_age",
];

/// Scale of human confidence inputs; `Percent` values are divided by 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceScale {
    #[default]
    Unit,
    Percent,
}

impl ConfidenceScale {
    fn normalize(self, v: f64) -> f64 {
        match self {
            Self::Unit => v,
            Self::Percent => v / 100.0,
        }
    }
}

impl FromStr for ConfidenceScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit" | "1" => Ok(Self::Unit),
            "percent" | "100" => Ok(Self::Percent),
            other => Err(format!(
                "unknown confidence scale `{other}` (expected unit or percent)"
            )),
        }
    }
}

/// One row written by the analysis stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPrediction {
    pub scenario_id: String,
    pub predicted_suppression: SuppressionCategory,
    pub predicted_intensity: u8,
    pub system_confidence: f64,
    pub predicted_age: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldRecord {
    pub scenario_id: String,
    pub gold_suppression: SuppressionCategory,
    pub gold_age: u32,
    pub human_confidences: Vec<f64>,
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn parse(bytes: &[u8]) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let header = reader
            .headers()
            .map_err(|e| EvalError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| match e.position() {
                Some(p) => EvalError::Row {
                    row: p.line(),
                    message: e.to_string(),
                },
                None => EvalError::Csv(e.to_string()),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize, EvalError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EvalError::Header {
                expected: name.to_string(),
                found: self.header.join(","),
            })
    }

    fn human_columns(&self) -> Vec<usize> {
        (0..self.header.len())
            .filter(|&i| self.header[i].starts_with(HUMAN_PREFIX))
            .collect()
    }
}

fn field<T: FromStr>(
    rec: &csv::StringRecord,
    row: u64,
    col: usize,
    name: &str,
) -> Result<T, EvalError> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse().map_err(|_| EvalError::Row {
        row,
        message: format!("invalid `{name}` value `{raw}`"),
    })
}

fn humans(
    rec: &csv::StringRecord,
    row: u64,
    cols: &[usize],
    scale: ConfidenceScale,
) -> Result<Vec<f64>, EvalError> {
    let mut out = Vec::new();
    for &c in cols {
        let raw = rec.get(c).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        let v: f64 = raw.parse().map_err(|_| EvalError::Row {
            row,
            message: format!("invalid human confidence `{raw}`"),
        })?;
        out.push(scale.normalize(v));
    }
    Ok(out)
}

fn row_err(row: u64) -> impl Fn(String) -> EvalError {
    move |message| EvalError::Row { row, message }
}

/// Combined layout: `scenario_id,gold_suppression,predicted_suppression,
/// system_confidence,gold_age,predicted_age` plus `human_confidence_<rater>`
/// columns.
pub fn parse_predictions(
    bytes: &[u8],
    scale: ConfidenceScale,
) -> Result<Vec<PredictionRecord>, EvalError> {
    let t = Table::parse(bytes)?;
    let cols = [
        t.column("scenario_id")?,
        t.column("gold_suppression")?,
        t.column("predicted_suppression")?,
        t.column("system_confidence")?,
        t.column("gold_age")?,
        t.column("predicted_age")?,
    ];
    let hc = t.human_columns();
    let mut out = Vec::with_capacity(t.rows.len());
    for (row, rec) in &t.rows {
        let row = *row;
        let r = PredictionRecord {
            scenario_id: field(rec, row, cols[0], "scenario_id")?,
            gold_suppression: field(rec, row, cols[1], "gold_suppression")?,
            predicted_suppression: field(rec, row, cols[2], "predicted_suppression")?,
            system_confidence: field(rec, row, cols[3], "system_confidence")?,
            gold_age: field(rec, row, cols[4], "gold_age")?,
            predicted_age: field(rec, row, cols[5], "predicted_age")?,
            human_confidences: humans(rec, row, &hc, scale)?,
        };
        r.validate().map_err(row_err(row))?;
        out.push(r);
    }
    if out.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(out)
}

/// Write the combined layout; human columns are named `r1`, `r2`, ...
pub fn predictions_csv(records: &[PredictionRecord]) -> String {
    let raters = records
        .iter()
        .map(|r| r.human_confidences.len())
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "scenario_id",
        "gold_suppression",
        "predicted_suppression",
        "system_confidence",
        "gold_age",
        "predicted_age",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=raters).map(|i| format!("{HUMAN_PREFIX}r{i}")));
    w.write_record(&header).expect("in-memory write");
    for r in records {
        let mut row = vec![
            r.scenario_id.clone(),
            r.gold_suppression.to_string(),
            r.predicted_suppression.to_string(),
            r.system_confidence.to_string(),
            r.gold_age.to_string(),
            r.predicted_age.to_string(),
        ];
        row.extend((0..raters).map(|i| {
            r.human_confidences
                .get(i)
                .map(f64::to_string)
                .unwrap_or_default()
        }));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn parse_system(bytes: &[u8]) -> Result<Vec<SystemPrediction>, EvalError> {
    let t = Table::parse(bytes)?;
    let cols = SYSTEM_HEADER.map(|c| t.column(c));
    let cols: Vec<usize> = cols.into_iter().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (row, rec) in &t.rows {
        let row = *row;
        let p = SystemPrediction {
            scenario_id: field(rec, row, cols[0], "scenario_id")?,
            predicted_suppression: field(rec, row, cols[1], "predicted_suppression")?,
            predicted_intensity: field(rec, row, cols[2], "predicted_intensity")?,
            system_confidence: field(rec, row, cols[3], "system_confidence")?,
            predicted_age: field(rec, row, cols[4], "predicted_age")?,
        };
        out.push(p);
    }
    Ok(out)
}

pub fn system_csv(rows: &[SystemPrediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SYSTEM_HEADER).expect("in-memory write");
    for p in rows {
        w.write_record([
            p.scenario_id.clone(),
            p.predicted_suppression.to_string(),
            p.predicted_intensity.to_string(),
            p.system_confidence.to_string(),
            p.predicted_age.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Gold layout: `scenario_id,gold_suppression,gold_age` plus optional
/// `human_confidence_<rater>` columns.
pub fn parse_gold(bytes: &[u8], scale: ConfidenceScale) -> Result<Vec<GoldRecord>, EvalError> {
    let t = Table::parse(bytes)?;
    let cols = [
        t.column("scenario_id")?,
        t.column("gold_suppression")?,
        t.column("gold_age")?,
    ];
    let hc = t.human_columns();
    let mut out = Vec::with_capacity(t.rows.len());
    for (row, rec) in &t.rows {
        let row = *row;
        out.push(GoldRecord {
            scenario_id: field(rec, row, cols[0], "scenario_id")?,
            gold_suppression: field(rec, row, cols[1], "gold_suppression")?,
            gold_age: field(rec, row, cols[2], "gold_age")?,
            human_confidences: humans(rec, row, &hc, scale)?,
        });
    }
    Ok(out)
}

pub fn gold_csv(gold: &[GoldRecord]) -> String {
    let raters = gold
        .iter()
        .map(|g| g.human_confidences.len())
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["scenario_id", "gold_suppression", "gold_age"]
        .map(String::from)
        .to_vec();
    header.extend((1..=raters).map(|i| format!("{HUMAN_PREFIX}r{i}")));
    w.write_record(&header).expect("in-memory write");
    for g in gold {
        let mut row = vec![
            g.scenario_id.clone(),
            g.gold_suppression.to_string(),
            g.gold_age.to_string(),
        ];
        row.extend((0..raters).map(|i| {
            g.human_confidences
                .get(i)
                .map(f64::to_string)
                .unwrap_or_default()
        }));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Join system predictions with gold on scenario id, in prediction order.
/// Gold defines the evaluated set: predictions without a gold row (for
/// example scenarios with no suppression) are skipped, and every gold row
/// must have a prediction.
pub fn join_gold(
    system: &[SystemPrediction],
    gold: &[GoldRecord],
) -> Result<Vec<PredictionRecord>, EvalError> {
    if let Some(g) = gold
        .iter()
        .find(|g| !system.iter().any(|p| p.scenario_id == g.scenario_id))
    {
        return Err(EvalError::MissingPrediction(g.scenario_id.clone()));
    }
    let mut joined = Vec::with_capacity(gold.len());
    for p in system {
        let Some(g) = gold.iter().find(|g| g.scenario_id == p.scenario_id) else {
            log::info!("{}: no gold record, skipped", p.scenario_id);
            continue;
        };
        let r = PredictionRecord {
            scenario_id: p.scenario_id.clone(),
            gold_suppression: g.gold_suppression,
            predicted_suppression: p.predicted_suppression,
            system_confidence: p.system_confidence,
            human_confidences: g.human_confidences.clone(),
            gold_age: g.gold_age,
            predicted_age: p.predicted_age,
        };
        r.validate()
            .map_err(|m| EvalError::Invalid(format!("{}: {m}", p.scenario_id)))?;
        joined.push(r);
    }
    if joined.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(joined)
}

fn read(path: &Path) -> Result<Vec<u8>, EvalError> {
    fs::read(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Read predictions in the combined layout, or in the analysis layout
/// joined with a separate gold file.
pub fn read_predictions(
    path: &Path,
    gold: Option<&Path>,
    scale: ConfidenceScale,
) -> Result<Vec<PredictionRecord>, EvalError> {
    let bytes = read(path)?;
    match gold {
        None => parse_predictions(&bytes, scale),
        Some(g) => join_gold(&parse_system(&bytes)?, &parse_gold(&read(g)?, scale)?),
    }
}

/// Ratings layout `rater_id,scenario_id,target,criterion,score`. Errors
/// carry the 1-based file line (the header is line 1).
pub fn parse_ratings(bytes: &[u8]) -> Result<Vec<LikertRating>, EvalError> {
    let t = Table::parse(bytes)?;
    if t.header != RATINGS_HEADER {
        return Err(EvalError::Header {
            expected: RATINGS_HEADER.join(","),
            found: t.header.join(","),
        });
    }
    let mut out = Vec::with_capacity(t.rows.len());
    for (row, rec) in &t.rows {
        let row = *row;
        let target: RatingTarget = rec[2].parse().map_err(row_err(row))?;
        let score: i64 = field(rec, row, 4, "score")?;
        out.push(
            LikertRating::new(&rec[0], &rec[1], target, &rec[3], score).map_err(row_err(row))?,
        );
    }
    Ok(out)
}

pub fn read_ratings(path: &Path) -> Result<Vec<LikertRating>, EvalError> {
    parse_ratings(&read(path)?)
}

/// Raw dump in the ingest layout.
pub fn ratings_csv(ratings: &[LikertRating]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATINGS_HEADER).expect("in-memory write");
    for r in ratings {
        w.write_record([
            r.rater_id.as_str(),
            r.scenario_id.as_str(),
            r.target.as_str(),
            r.criterion.as_str(),
            &r.score.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
