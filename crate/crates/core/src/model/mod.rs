//! Domain data model shared by every pipeline stage.

mod categories;
mod dialogue;
mod error;
mod expert;
mod feedback;
mod reports;
mod scenario;

pub use categories::{BiasCategory, Gender, Speaker, SuppressionCategory};
pub use dialogue::{Dialogue, DialogueTurn, DEFAULT_LANGUAGE};
pub use error::{CsvError, ModelError};
pub use expert::{AgentId, ExpertAxis, ExpertProfile};
pub use feedback::{FeedbackBundle, FeedbackDraft, PeerComment};
pub use reports::{
    AttributeReport, Audience, BiasReport, DetectionSource, SituationReport, SuppressionReport,
};
pub use scenario::{
    BiasAnnotation, ChildPersona, MetadataError, ParentPersona, ScenarioMetadata,
    SuppressionAnnotation, Topic,
};
