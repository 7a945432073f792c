use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Category of an emotion the child holds back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionCategory {
    Anxiety,
    Emotional,
    Fear,
    Social,
    Behavioral,
    SelfEsteem,
}

impl SuppressionCategory {
    /// Fixed order used for confusion matrices and reports.
    pub const ALL: [SuppressionCategory; 6] = [
        SuppressionCategory::Anxiety,
        SuppressionCategory::Emotional,
        SuppressionCategory::Fear,
        SuppressionCategory::Social,
        SuppressionCategory::Behavioral,
        SuppressionCategory::SelfEsteem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Anxiety => "anxiety",
            Self::Emotional => "emotional",
            Self::Fear => "fear",
            Self::Social => "social",
            Self::Behavioral => "behavioral",
            Self::SelfEsteem => "self_esteem",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SuppressionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuppressionCategory {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValue {
                kind: "suppression category",
                value: s.to_string(),
            })
    }
}

/// Prompt-seeding categories of ideal parent bias.
///
/// These only seed the bias agent's prompt; the agent's description is free
/// text and may mix several categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCategory {
    AcademicExcellence,
    GenderNorms,
    SocialComparison,
    SelfReplication,
    RoleBasedExpectation,
    SelfEsteemProjection,
}

impl BiasCategory {
    pub const ALL: [BiasCategory; 6] = [
        BiasCategory::AcademicExcellence,
        BiasCategory::GenderNorms,
        BiasCategory::SocialComparison,
        BiasCategory::SelfReplication,
        BiasCategory::RoleBasedExpectation,
        BiasCategory::SelfEsteemProjection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AcademicExcellence => "academic_excellence",
            Self::GenderNorms => "gender_norms",
            Self::SocialComparison => "social_comparison",
            Self::SelfReplication => "self_replication",
            Self::RoleBasedExpectation => "role_based_expectation",
            Self::SelfEsteemProjection => "self_esteem_projection",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::AcademicExcellence => "Academic Excellence",
            Self::GenderNorms => "Gender Norms",
            Self::SocialComparison => "Social Comparison",
            Self::SelfReplication => "Self-replication",
            Self::RoleBasedExpectation => "Role-based Expectation",
            Self::SelfEsteemProjection => "Self-esteem Projection",
        }
    }

    /// Example expressions shown to the bias agent.
    pub fn examples(self) -> &'static [&'static str] {
        match self {
            Self::AcademicExcellence => &["You have to get good grades", "You must study harder"],
            Self::GenderNorms => &["Boys shouldn't cry", "Girls should be more considerate"],
            Self::SocialComparison => &[
                "Why can't you be like your sibling?",
                "comparisons with peers",
            ],
            Self::SelfReplication => &[
                "When I was your age...",
                "references to the parent's own values",
            ],
            Self::RoleBasedExpectation => &[
                "As a big brother/sister, you should...",
                "expectations based on roles",
            ],
            Self::SelfEsteemProjection => {
                &["You're embarrassing me", "projecting status-based concerns"]
            }
        }
    }
}

impl fmt::Display for BiasCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasCategory {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValue {
                kind: "bias category",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Parent,
    Child,
}

impl Speaker {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Parent => "parent",
            Self::Child => "child",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::Parent => Self::Child,
            Self::Child => Self::Parent,
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Speaker {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parent" => Ok(Self::Parent),
            "child" => Ok(Self::Child),
            _ => Err(ModelError::UnknownValue {
                kind: "speaker",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Male => "male",
            Self::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Self::Male),
            "female" => Ok(Self::Female),
            _ => Err(ModelError::UnknownValue {
                kind: "gender",
                value: s.to_string(),
            }),
        }
    }
}
