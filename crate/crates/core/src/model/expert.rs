use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Expert identifier. Ordering is plain string order and serves as the
/// deterministic tie-break wherever similarities are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertAxis {
    DomainExpertise,
    PerspectiveStance,
}

/// A role-playing expert. `background` is the document the expert's persona
/// prompt is built from and the text that gets embedded for ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertProfile {
    pub id: AgentId,
    pub name: String,
    pub axis: ExpertAxis,
    pub field: String,
    pub background: String,
}

impl ExpertProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.as_str().trim().is_empty() {
            return Err(ModelError::Empty("id"));
        }
        if self.background.trim().is_empty() {
            return Err(ModelError::Empty("background"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let profile: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        profile.validate().map_err(|e| e.to_string())?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }
}
