use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AgentId, ModelError};

/// One expert's feedback at round 0 (initial) or round 1 (refined).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackDraft {
    pub agent_id: AgentId,
    pub round: u8,
    pub child_feedback: String,
    pub adult_feedback: String,
}

impl FeedbackDraft {
    pub fn new(
        agent_id: AgentId,
        round: u8,
        child_feedback: impl Into<String>,
        adult_feedback: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if round > 1 {
            return Err(ModelError::OutOfRange {
                field: "round",
                range: "{0, 1}",
                value: round.to_string(),
            });
        }
        let child_feedback = child_feedback.into();
        let adult_feedback = adult_feedback.into();
        if child_feedback.trim().is_empty() {
            return Err(ModelError::Empty("child_feedback"));
        }
        if adult_feedback.trim().is_empty() {
            return Err(ModelError::Empty("adult_feedback"));
        }
        Ok(Self {
            agent_id,
            round,
            child_feedback,
            adult_feedback,
        })
    }

    pub fn render(&self) -> String {
        format!(
            "[for the child]\n{}\n\n[for the parent]\n{}",
            self.child_feedback, self.adult_feedback
        )
    }
}

/// Comment written by `from_agent` on the draft authored by `to_agent`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerComment {
    pub from_agent: AgentId,
    pub to_agent: AgentId,
    pub content: String,
}

impl PeerComment {
    pub fn new(
        from_agent: AgentId,
        to_agent: AgentId,
        content: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if from_agent == to_agent {
            return Err(ModelError::Inconsistent(format!(
                "{from_agent} cannot comment on its own draft"
            )));
        }
        let content = content.into();
        if content.trim().is_empty() {
            return Err(ModelError::Empty("comment"));
        }
        Ok(Self {
            from_agent,
            to_agent,
            content,
        })
    }
}

/// Every artifact of one panel discussion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub scenario_id: String,
    pub panel: Vec<AgentId>,
    pub initial_drafts: Vec<FeedbackDraft>,
    pub comments: Vec<PeerComment>,
    pub refined_drafts: Vec<FeedbackDraft>,
    pub final_child: String,
    pub final_adult: String,
}

impl FeedbackBundle {
    /// Checks the structural law: one draft per member per round, and
    /// `n(n-1)` comments with each member receiving `n-1`, none self-addressed.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.panel.len();
        let mut members: Vec<&AgentId> = self.panel.iter().collect();
        members.sort();
        members.dedup();
        if members.len() != n || n < 2 {
            return Err(ModelError::Inconsistent(format!(
                "panel must have at least 2 distinct members, got {:?}",
                self.panel
            )));
        }
        for (round, drafts) in [(0u8, &self.initial_drafts), (1, &self.refined_drafts)] {
            let authors: Vec<&AgentId> = drafts.iter().map(|d| &d.agent_id).collect();
            if authors != self.panel.iter().collect::<Vec<_>>() {
                return Err(ModelError::Inconsistent(format!(
                    "round {round} drafts do not match the panel order"
                )));
            }
            if drafts.iter().any(|d| d.round != round) {
                return Err(ModelError::Inconsistent(format!(
                    "draft with wrong round in round {round}"
                )));
            }
        }
        if self.comments.len() != n * (n - 1) {
            return Err(ModelError::Inconsistent(format!(
                "expected {} comments, found {}",
                n * (n - 1),
                self.comments.len()
            )));
        }
        let mut received: BTreeMap<&AgentId, usize> = BTreeMap::new();
        let mut pairs = std::collections::BTreeSet::new();
        for c in &self.comments {
            if c.from_agent == c.to_agent {
                return Err(ModelError::Inconsistent("self-addressed comment".into()));
            }
            if !self.panel.contains(&c.from_agent) || !self.panel.contains(&c.to_agent) {
                return Err(ModelError::Inconsistent(
                    "comment from outside the panel".into(),
                ));
            }
            if !pairs.insert((&c.from_agent, &c.to_agent)) {
                return Err(ModelError::Inconsistent("duplicate comment pair".into()));
            }
            *received.entry(&c.to_agent).or_default() += 1;
        }
        if received.values().any(|&k| k != n - 1) || received.len() != n {
            return Err(ModelError::Inconsistent(
                "uneven comment distribution".into(),
            ));
        }
        if self.final_child.trim().is_empty() || self.final_adult.trim().is_empty() {
            return Err(ModelError::Empty("final feedback"));
        }
        Ok(())
    }

    /// Comments received by `author`, in panel order of the reviewers.
    pub fn comments_for(&self, author: &AgentId) -> Vec<&PeerComment> {
        self.comments
            .iter()
            .filter(|c| &c.to_agent == author)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> FeedbackBundle {
        let panel: Vec<AgentId> = (1..=5).map(|i| AgentId::new(format!("e{i}"))).collect();
        let drafts = |round| {
            panel
                .iter()
                .map(|a| FeedbackDraft::new(a.clone(), round, "c", "a").unwrap())
                .collect::<Vec<_>>()
        };
        let mut comments = Vec::new();
        for to in &panel {
            for from in &panel {
                if from != to {
                    comments.push(PeerComment::new(from.clone(), to.clone(), "ok").unwrap());
                }
            }
        }
        FeedbackBundle {
            scenario_id: "s".into(),
            initial_drafts: drafts(0),
            refined_drafts: drafts(1),
            panel,
            comments,
            final_child: "child".into(),
            final_adult: "adult".into(),
        }
    }

    #[test]
    fn complete_bundle_validates() {
        let b = bundle();
        b.validate().unwrap();
        assert_eq!(b.comments.len(), 20);
        for a in &b.panel {
            assert_eq!(b.comments_for(a).len(), 4);
        }
    }

    #[test]
    fn structural_violations_detected() {
        let mut b = bundle();
        b.comments.pop();
        assert!(b.validate().is_err());

        let mut b = bundle();
        b.comments[0].from_agent = b.comments[0].to_agent.clone();
        assert!(b.validate().is_err());

        let mut b = bundle();
        b.refined_drafts[2].round = 0;
        assert!(b.validate().is_err());

        let mut b = bundle();
        b.final_adult = " ".into();
        assert!(b.validate().is_err());
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(FeedbackDraft::new("a".into(), 2, "c", "a").is_err());
        assert!(FeedbackDraft::new("a".into(), 0, "", "a").is_err());
        assert!(PeerComment::new("a".into(), "a".into(), "x").is_err());
    }
}
