use thiserror::Error;

/// Invariant violation while constructing a domain value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} must be in {range}, got {value}")]
    OutOfRange {
        field: &'static str,
        range: &'static str,
        value: String,
    },
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("unknown {kind} `{value}`")]
    UnknownValue { kind: &'static str, value: String },
    #[error("{0}")]
    Inconsistent(String),
}

/// Failure reading a dialogue CSV.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("unexpected header `{found}`, expected `index,speaker,content[,narrator_note]`")]
    BadHeader { found: String },
    #[error("row {row}: invalid index `{value}`")]
    BadIndex { row: usize, value: String },
    #[error("row {row}: expected turn index {expected}, found {found}")]
    IndexGap {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: unknown speaker `{label}`")]
    UnknownSpeaker { row: usize, label: String },
    #[error("row {row}: speaker {speaker} speaks twice in a row")]
    NotAlternating { row: usize, speaker: String },
    #[error("row {row}: empty content")]
    EmptyContent { row: usize },
    #[error("dialogue has no turns")]
    NoTurns,
}
