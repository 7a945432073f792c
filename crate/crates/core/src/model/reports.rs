use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Gender, ModelError, SuppressionCategory};

fn check_confidence(c: f64) -> Result<f64, ModelError> {
    if c.is_finite() && (0.0..=1.0).contains(&c) {
        Ok(c)
    } else {
        Err(ModelError::OutOfRange {
            field: "c",
            range: "[0.0, 1.0]",
            value: c.to_string(),
        })
    }
}

fn check_text(text: String, field: &'static str) -> Result<String, ModelError> {
    if text.trim().is_empty() {
        Err(ModelError::Empty(field))
    } else {
        Ok(text)
    }
}

/// Output of the suppressed-emotion agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSuppressionReport")]
pub struct SuppressionReport {
    s: u8,
    suppression_type: SuppressionCategory,
    reason: String,
    c: f64,
}

#[derive(Deserialize)]
struct RawSuppressionReport {
    s: i64,
    suppression_type: SuppressionCategory,
    reason: String,
    c: f64,
}

impl TryFrom<RawSuppressionReport> for SuppressionReport {
    type Error = ModelError;

    fn try_from(raw: RawSuppressionReport) -> Result<Self, Self::Error> {
        Self::new(raw.s, raw.suppression_type, raw.reason, raw.c)
    }
}

impl SuppressionReport {
    pub fn new(
        s: i64,
        suppression_type: SuppressionCategory,
        reason: impl Into<String>,
        c: f64,
    ) -> Result<Self, ModelError> {
        if !(1..=5).contains(&s) {
            return Err(ModelError::OutOfRange {
                field: "s",
                range: "{1, 2, 3, 4, 5}",
                value: s.to_string(),
            });
        }
        Ok(Self {
            s: s as u8,
            suppression_type,
            reason: check_text(reason.into(), "reason")?,
            c: check_confidence(c)?,
        })
    }

    /// Suppression intensity on the five-point scale.
    pub fn intensity(&self) -> u8 {
        self.s
    }

    pub fn category(&self) -> SuppressionCategory {
        self.suppression_type
    }

    pub fn reason(&self) -> &str {
        &self.reason
    }

    pub fn confidence(&self) -> f64 {
        self.c
    }
}

/// Output of the attribute-estimation agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAttributeReport")]
pub struct AttributeReport {
    gender: Gender,
    age: u32,
    background: String,
}

#[derive(Deserialize)]
struct RawAttributeReport {
    gender: Gender,
    age: i64,
    background: String,
}

impl TryFrom<RawAttributeReport> for AttributeReport {
    type Error = ModelError;

    fn try_from(raw: RawAttributeReport) -> Result<Self, Self::Error> {
        Self::new(raw.gender, raw.age, raw.background)
    }
}

impl AttributeReport {
    pub fn new(
        gender: Gender,
        age: i64,
        background: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if age < 1 || age > u32::MAX as i64 {
            return Err(ModelError::OutOfRange {
                field: "age",
                range: "positive whole years",
                value: age.to_string(),
            });
        }
        Ok(Self {
            gender,
            age: age as u32,
            background: check_text(background.into(), "background")?,
        })
    }

    pub fn gender(&self) -> Gender {
        self.gender
    }

    pub fn age(&self) -> u32 {
        self.age
    }

    pub fn background(&self) -> &str {
        &self.background
    }
}

/// Output of the bias-description agent. The description is free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBiasReport")]
pub struct BiasReport {
    bias_description: String,
    c: f64,
}

#[derive(Deserialize)]
struct RawBiasReport {
    bias_description: String,
    c: f64,
}

impl TryFrom<RawBiasReport> for BiasReport {
    type Error = ModelError;

    fn try_from(raw: RawBiasReport) -> Result<Self, Self::Error> {
        Self::new(raw.bias_description, raw.c)
    }
}

impl BiasReport {
    pub fn new(bias_description: impl Into<String>, c: f64) -> Result<Self, ModelError> {
        Ok(Self {
            bias_description: check_text(bias_description.into(), "bias_description")?,
            c: check_confidence(c)?,
        })
    }

    pub fn description(&self) -> &str {
        &self.bias_description
    }

    pub fn confidence(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Child,
    Adult,
}

impl Audience {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Child => "child",
            Self::Adult => "adult",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionSource {
    Suppression(SuppressionReport),
    Bias(BiasReport),
}

impl DetectionSource {
    fn audience(&self) -> Audience {
        match self {
            Self::Suppression(_) => Audience::Child,
            Self::Bias(_) => Audience::Adult,
        }
    }
}

/// Meta-agent synthesis for one audience.
///
/// Detection fields and attributes are carried verbatim; only `summary` is
/// generated by the meta-agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSituationReport")]
pub struct SituationReport {
    audience: Audience,
    scenario_id: String,
    summary: String,
    source: DetectionSource,
    attributes: AttributeReport,
}

#[derive(Deserialize)]
struct RawSituationReport {
    audience: Audience,
    scenario_id: String,
    summary: String,
    source: DetectionSource,
    attributes: AttributeReport,
}

impl TryFrom<RawSituationReport> for SituationReport {
    type Error = ModelError;

    fn try_from(r: RawSituationReport) -> Result<Self, Self::Error> {
        Self::new(r.audience, r.scenario_id, r.summary, r.source, r.attributes)
    }
}

impl SituationReport {
    pub fn new(
        audience: Audience,
        scenario_id: impl Into<String>,
        summary: impl Into<String>,
        source: DetectionSource,
        attributes: AttributeReport,
    ) -> Result<Self, ModelError> {
        if source.audience() != audience {
            return Err(ModelError::Inconsistent(format!(
                "{} report cannot carry a {} detection",
                audience.as_str(),
                match source {
                    DetectionSource::Suppression(_) => "suppression",
                    DetectionSource::Bias(_) => "bias",
                }
            )));
        }
        Ok(Self {
            audience,
            scenario_id: scenario_id.into(),
            summary: check_text(summary.into(), "summary")?,
            source,
            attributes,
        })
    }

    pub fn audience(&self) -> Audience {
        self.audience
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn source(&self) -> &DetectionSource {
        &self.source
    }

    pub fn attributes(&self) -> &AttributeReport {
        &self.attributes
    }

    pub fn suppression(&self) -> Option<&SuppressionReport> {
        match &self.source {
            DetectionSource::Suppression(s) => Some(s),
            DetectionSource::Bias(_) => None,
        }
    }

    pub fn bias(&self) -> Option<&BiasReport> {
        match &self.source {
            DetectionSource::Bias(b) => Some(b),
            DetectionSource::Suppression(_) => None,
        }
    }

    /// Stable text rendering used in prompts and for embedding.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "[{} report] scenario {}",
            self.audience.as_str(),
            self.scenario_id
        );
        let _ = writeln!(out, "summary: {}", self.summary);
        match &self.source {
            DetectionSource::Suppression(s) => {
                let _ = writeln!(
                    out,
                    "suppression: type={} intensity={}/5 confidence={}",
                    s.category(),
                    s.intensity(),
                    s.confidence()
                );
                let _ = writeln!(out, "reason: {}", s.reason());
            }
            DetectionSource::Bias(b) => {
                let _ = writeln!(out, "bias: {}", b.description());
                let _ = writeln!(out, "confidence: {}", b.confidence());
            }
        }
        let a = &self.attributes;
        let _ = writeln!(out, "child: gender={} age={}", a.gender(), a.age());
        let _ = write!(out, "background: {}", a.background());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
