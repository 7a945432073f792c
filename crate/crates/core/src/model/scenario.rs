use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BiasCategory, Gender, Speaker, SuppressionCategory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetadataError {
    #[error("metadata is not valid TOML: {0}")]
    Syntax(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("`{field}` must be in [1, 5], got {value}")]
    StrengthRange { field: &'static str, value: i64 },
    #[error("`child_persona.age` must be positive, got {0}")]
    AgeRange(i64),
    #[error("unknown {kind} `{value}`")]
    UnknownValue { kind: &'static str, value: String },
    #[error("suppression fields inconsistent: {0}")]
    Inconsistent(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topic {
    Play,
    Study,
    FuturePlans,
    Other(String),
}

impl Topic {
    pub fn parse(s: &str) -> Self {
        match s {
            "play" => Self::Play,
            "study" => Self::Study,
            "future_plans" => Self::FuturePlans,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Self::Play => "play",
            Self::Study => "study",
            Self::FuturePlans => "future_plans",
            Self::Other(s) => s,
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildPersona {
    pub age: u32,
    pub personality: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentPersona {
    pub gender: Gender,
    pub upbringing_background: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasAnnotation {
    pub category: BiasCategory,
    pub strength: u8,
    pub formation_background: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuppressionAnnotation {
    pub category: SuppressionCategory,
    pub strength: u8,
}

/// Per-scenario annotation stored beside the dialogue CSV as
/// `<scenario_id>.meta` (TOML, two levels deep).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioMetadata {
    pub scenario_id: String,
    pub topic: Topic,
    pub child_persona: ChildPersona,
    pub parent_persona: ParentPersona,
    pub bias: BiasAnnotation,
    /// `None` when the scenario has no suppression.
    pub suppression: Option<SuppressionAnnotation>,
    pub starter: Speaker,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    scenario_id: Option<String>,
    topic: Option<String>,
    starter: Option<String>,
    child_persona: Option<RawChild>,
    parent_persona: Option<RawParent>,
    bias: Option<RawBias>,
    suppression: Option<RawSuppression>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChild {
    age: Option<i64>,
    personality: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParent {
    gender: Option<String>,
    upbringing_background: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBias {
    category: Option<String>,
    strength: Option<i64>,
    formation_background: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuppression {
    present: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strength: Option<i64>,
}

fn need<T>(value: Option<T>, field: &'static str) -> Result<T, MetadataError> {
    value.ok_or(MetadataError::MissingField(field))
}

fn strength(value: i64, field: &'static str) -> Result<u8, MetadataError> {
    if (1..=5).contains(&value) {
        Ok(value as u8)
    } else {
        Err(MetadataError::StrengthRange { field, value })
    }
}

fn parse_enum<T: std::str::FromStr>(value: &str, kind: &'static str) -> Result<T, MetadataError> {
    value.parse().map_err(|_| MetadataError::UnknownValue {
        kind,
        value: value.to_string(),
    })
}

impl ScenarioMetadata {
    pub fn from_toml(text: &str) -> Result<Self, MetadataError> {
        let raw: RawMeta =
            toml::from_str(text).map_err(|e| MetadataError::Syntax(e.to_string()))?;
        let scenario_id = need(raw.scenario_id, "scenario_id")?;
        let topic = Topic::parse(&need(raw.topic, "topic")?);
        let starter = parse_enum(&need(raw.starter, "starter")?, "starter")?;

        let child = need(raw.child_persona, "child_persona")?;
        let age = need(child.age, "child_persona.age")?;
        if age < 1 || age > u32::MAX as i64 {
            return Err(MetadataError::AgeRange(age));
        }
        let child_persona = ChildPersona {
            age: age as u32,
            personality: need(child.personality, "child_persona.personality")?,
        };

        let parent = need(raw.parent_persona, "parent_persona")?;
        let parent_persona = ParentPersona {
            gender: parse_enum(&need(parent.gender, "parent_persona.gender")?, "gender")?,
            upbringing_background: need(
                parent.upbringing_background,
                "parent_persona.upbringing_background",
            )?,
        };

        let bias = need(raw.bias, "bias")?;
        let bias = BiasAnnotation {
            category: parse_enum(&need(bias.category, "bias.category")?, "bias category")?,
            strength: strength(need(bias.strength, "bias.strength")?, "bias.strength")?,
            formation_background: need(bias.formation_background, "bias.formation_background")?,
        };

        let sup = need(raw.suppression, "suppression")?;
        let suppression = match (
            need(sup.present, "suppression.present")?,
            sup.category,
            sup.strength,
        ) {
            (false, None, None) => None,
            (false, _, _) => {
                return Err(MetadataError::Inconsistent(
                    "present = false but category or strength is set",
                ))
            }
            (true, Some(category), Some(value)) => Some(SuppressionAnnotation {
                category: parse_enum(&category, "suppression category")?,
                strength: strength(value, "suppression.strength")?,
            }),
            (true, _, _) => {
                return Err(MetadataError::Inconsistent(
                    "present = true requires both category and strength",
                ))
            }
        };

        Ok(Self {
            scenario_id,
            topic,
            child_persona,
            parent_persona,
            bias,
            suppression,
            starter,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MetadataError> {
        let text = std::str::from_utf8(bytes).map_err(|e| MetadataError::Syntax(e.to_string()))?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> String {
        let raw = RawMeta {
            scenario_id: Some(self.scenario_id.clone()),
            topic: Some(self.topic.as_str().to_string()),
            starter: Some(self.starter.as_str().to_string()),
            child_persona: Some(RawChild {
                age: Some(self.child_persona.age as i64),
                personality: Some(self.child_persona.personality.clone()),
            }),
            parent_persona: Some(RawParent {
                gender: Some(self.parent_persona.gender.as_str().to_string()),
                upbringing_background: Some(self.parent_persona.upbringing_background.clone()),
            }),
            bias: Some(RawBias {
                category: Some(self.bias.category.as_str().to_string()),
                strength: Some(self.bias.strength as i64),
                formation_background: Some(self.bias.formation_background.clone()),
            }),
            suppression: Some(RawSuppression {
                present: Some(self.suppression.is_some()),
                category: self
                    .suppression
                    .as_ref()
                    .map(|s| s.category.as_str().to_string()),
                strength: self.suppression.as_ref().map(|s| s.strength as i64),
            }),
        };
        toml::to_string(&raw).expect("metadata serializes")
    }
}
