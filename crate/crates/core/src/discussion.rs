//! The four-step panel discussion: initial drafts, peer comments on every
//! ordered pair, refinement, and final integration into one message per
//! audience.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::exec::fan_out;
use crate::experts::{pair_text, ExpertPanel, ExpertPool};
use crate::model::{
    AgentId, Dialogue, ExpertProfile, FeedbackBundle, FeedbackDraft, PeerComment, SituationReport,
};
use crate::structured::{extract_json_object, get_str, AgentContext, AgentError, CallRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    InitialDrafts,
    PeerComments,
    Refinement,
    Integration,
}

impl Step {
    pub const ALL: [Step; 4] = [
        Self::InitialDrafts,
        Self::PeerComments,
        Self::Refinement,
        Self::Integration,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::InitialDrafts => "initial_draft",
            Self::PeerComments => "peer_comment",
            Self::Refinement => "refine_draft",
            Self::Integration => "final_integration",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.number(), self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscussionError {
    #[error("step {step}{}: {source}", agent.as_ref().map(|a| format!(", agent {a}")).unwrap_or_default())]
    Agent {
        step: Step,
        agent: Option<AgentId>,
        #[source]
        source: Box<AgentError>,
    },
    #[error("panel member `{0}` is not in the pool")]
    UnknownMember(AgentId),
    #[error("bundle invariant violated: {0}")]
    Bundle(String),
}

impl DiscussionError {
    pub fn is_backend(&self) -> bool {
        matches!(self, Self::Agent { source, .. } if source.is_backend())
    }
}

/// Output of one step plus the calls it made, in deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub value: T,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedCall {
    pub step: Step,
    pub record: CallRecord,
}

/// Call log of one discussion.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscussionTranscript {
    pub scenario_id: String,
    pub panel: ExpertPanel,
    pub calls: Vec<LoggedCall>,
}

impl DiscussionTranscript {
    pub fn calls_in(&self, step: Step) -> usize {
        self.calls.iter().filter(|c| c.step == step).count()
    }

    /// One tab-separated line per call: step, tag, agent, prompt hash,
    /// response hash.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for c in &self.calls {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                c.step.number(),
                c.record.tag,
                c.record.agent.as_deref().unwrap_or("-"),
                c.record.prompt_hash,
                c.record.response_hash
            ));
        }
        out
    }
}

fn persona_vars(e: &ExpertProfile) -> BTreeMap<&'static str, String> {
    let mut vars = BTreeMap::new();
    vars.insert("agent_name", e.name.clone());
    vars.insert("agent_field", e.field.clone());
    vars.insert("background", e.background.trim().to_string());
    vars
}

fn fail(step: Step, agent: Option<&AgentId>) -> impl Fn(AgentError) -> DiscussionError + '_ {
    move |source| DiscussionError::Agent {
        step,
        agent: agent.cloned(),
        source: Box::new(source),
    }
}

fn parse_draft(agent: &AgentId, round: u8) -> impl Fn(&str) -> Result<FeedbackDraft, String> + '_ {
    move |raw| {
        let obj = extract_json_object(raw)?;
        let child = get_str(&obj, "child_feedback")?;
        let adult = get_str(&obj, "adult_feedback")?;
        FeedbackDraft::new(agent.clone(), round, child.trim(), adult.trim())
            .map_err(|e| e.to_string())
    }
}

fn collect<T>(
    results: Vec<Result<(T, Vec<CallRecord>), DiscussionError>>,
) -> Result<StepOutput<Vec<T>>, DiscussionError> {
    let mut value = Vec::with_capacity(results.len());
    let mut calls = Vec::new();
    for r in results {
        let (v, c) = r?;
        value.push(v);
        calls.extend(c);
    }
    Ok(StepOutput { value, calls })
}

/// Step 1: every expert drafts feedback for both audiences from the dialogue
/// and the combined report.
pub fn initial_drafts(
    ctx: &AgentContext<'_>,
    experts: &[ExpertProfile],
    d: &Dialogue,
    r_child: &SituationReport,
    r_adult: &SituationReport,
) -> Result<StepOutput<Vec<FeedbackDraft>>, DiscussionError> {
    let step = Step::InitialDrafts;
    let transcript = d.transcript(true);
    let report = pair_text(r_child, r_adult);
    collect(fan_out(ctx.concurrency, experts, |_, e| {
        let mut vars = persona_vars(e);
        vars.insert("transcript", transcript.clone());
        vars.insert("report", report.clone());
        let req = ctx
            .request(step.tag(), &vars)
            .map_err(fail(step, Some(&e.id)))?
            .with_context("scenario_id", d.scenario_id())
            .with_context("agent_id", &e.id)
            .with_context("round", 0);
        let out = ctx
            .ask(req, parse_draft(&e.id, 0))
            .map_err(fail(step, Some(&e.id)))?;
        Ok((out.parsed, out.calls))
    }))
}

/// Step 2: each expert comments once on every other expert's draft.
/// Comments come out reviewer-major in panel order.
pub fn peer_comments(
    ctx: &AgentContext<'_>,
    experts: &[ExpertProfile],
    drafts: &[FeedbackDraft],
    scenario_id: &str,
) -> Result<StepOutput<Vec<PeerComment>>, DiscussionError> {
    let step = Step::PeerComments;
    let pairs: Vec<(usize, usize)> = (0..experts.len())
        .flat_map(|j| {
            (0..experts.len())
                .filter(move |&i| i != j)
                .map(move |i| (j, i))
        })
        .collect();
    collect(fan_out(ctx.concurrency, &pairs, |_, &(j, i)| {
        let (reviewer, author) = (&experts[j], &experts[i]);
        let mut vars = persona_vars(reviewer);
        vars.insert("author_name", author.name.clone());
        vars.insert("author_field", author.field.clone());
        vars.insert("draft", drafts[i].render());
        let req = ctx
            .request(step.tag(), &vars)
            .map_err(fail(step, Some(&reviewer.id)))?
            .with_context("scenario_id", scenario_id)
            .with_context("agent_id", &reviewer.id)
            .with_context("author_id", &author.id);
        let out = ctx
            .ask(req, |raw| {
                PeerComment::new(reviewer.id.clone(), author.id.clone(), raw.trim())
                    .map_err(|e| e.to_string())
            })
            .map_err(fail(step, Some(&reviewer.id)))?;
        Ok((out.parsed, out.calls))
    }))
}

/// Step 3: each expert revises its draft with exactly the comments it
/// received, shown with reviewer identity.
pub fn refine_drafts(
    ctx: &AgentContext<'_>,
    experts: &[ExpertProfile],
    drafts: &[FeedbackDraft],
    comments: &[PeerComment],
    scenario_id: &str,
) -> Result<StepOutput<Vec<FeedbackDraft>>, DiscussionError> {
    let step = Step::Refinement;
    let by_id: BTreeMap<&AgentId, &ExpertProfile> = experts.iter().map(|e| (&e.id, e)).collect();
    collect(fan_out(ctx.concurrency, experts, |i, e| {
        let received: Vec<String> = comments
            .iter()
            .filter(|c| c.to_agent == e.id)
            .map(|c| {
                let reviewer = by_id[&c.from_agent];
                format!("- {} ({}): {}", reviewer.name, reviewer.field, c.content)
            })
            .collect();
        let mut vars = persona_vars(e);
        vars.insert("draft", drafts[i].render());
        vars.insert("comments", received.join("\n"));
        let req = ctx
            .request(step.tag(), &vars)
            .map_err(fail(step, Some(&e.id)))?
            .with_context("scenario_id", scenario_id)
            .with_context("agent_id", &e.id)
            .with_context("round", 1);
        let out = ctx
            .ask(req, parse_draft(&e.id, 1))
            .map_err(fail(step, Some(&e.id)))?;
        Ok((out.parsed, out.calls))
    }))
}

/// Step 4: one call merges all refined drafts into the final child and
/// parent messages.
pub fn integrate_final(
    ctx: &AgentContext<'_>,
    experts: &[ExpertProfile],
    refined: &[FeedbackDraft],
    scenario_id: &str,
) -> Result<StepOutput<(String, String)>, DiscussionError> {
    let step = Step::Integration;
    let drafts: Vec<String> = experts
        .iter()
        .zip(refined)
        .enumerate()
        .map(|(k, (e, f))| {
            format!(
                "### Panel member {}: {} ({})\n{}",
                k + 1,
                e.name,
                e.field,
                f.render()
            )
        })
        .collect();
    let mut vars = BTreeMap::new();
    vars.insert("drafts", drafts.join("\n\n"));
    let req = ctx
        .request(step.tag(), &vars)
        .map_err(fail(step, None))?
        .with_context("scenario_id", scenario_id);
    let out = ctx
        .ask(req, |raw| {
            let obj = extract_json_object(raw)?;
            Ok((
                get_str(&obj, "final_child")?.trim().to_string(),
                get_str(&obj, "final_adult")?.trim().to_string(),
            ))
        })
        .map_err(fail(step, None))?;
    Ok(StepOutput {
        value: out.parsed,
        calls: out.calls,
    })
}

/// Run steps 1 to 4 in order. Calls within a step may run concurrently;
/// the bundle and log are assembled in panel order.
pub fn run_discussion(
    ctx: &AgentContext<'_>,
    pool: &ExpertPool,
    panel: &ExpertPanel,
    d: &Dialogue,
    r_child: &SituationReport,
    r_adult: &SituationReport,
) -> Result<(FeedbackBundle, DiscussionTranscript), DiscussionError> {
    let members = panel.members();
    let experts = members
        .iter()
        .map(|id| {
            pool.get(id)
                .cloned()
                .ok_or_else(|| DiscussionError::UnknownMember(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scenario_id = d.scenario_id();
    let mut calls = Vec::new();
    let mut log = |step: Step, records: Vec<CallRecord>| {
        calls.extend(
            records
                .into_iter()
                .map(|record| LoggedCall { step, record }),
        );
    };

    let drafts0 = initial_drafts(ctx, &experts, d, r_child, r_adult)?;
    log(Step::InitialDrafts, drafts0.calls);
    let comments = peer_comments(ctx, &experts, &drafts0.value, scenario_id)?;
    log(Step::PeerComments, comments.calls);
    let drafts1 = refine_drafts(ctx, &experts, &drafts0.value, &comments.value, scenario_id)?;
    log(Step::Refinement, drafts1.calls);
    let finals = integrate_final(ctx, &experts, &drafts1.value, scenario_id)?;
    log(Step::Integration, finals.calls);

    let bundle = FeedbackBundle {
        scenario_id: scenario_id.to_string(),
        panel: members,
        initial_drafts: drafts0.value,
        comments: comments.value,
        refined_drafts: drafts1.value,
        final_child: finals.value.0,
        final_adult: finals.value.1,
    };
    bundle
        .validate()
        .map_err(|e| DiscussionError::Bundle(e.to_string()))?;
    let transcript = DiscussionTranscript {
        scenario_id: scenario_id.to_string(),
        panel: panel.clone(),
        calls,
    };
    Ok((bundle, transcript))
}

fn write_draft(dir: &Path, draft: &FeedbackDraft) -> io::Result<()> {
    fs::write(
        dir.join(format!("{}.child", draft.agent_id)),
        format!("{}\n", draft.child_feedback),
    )?;
    fs::write(
        dir.join(format!("{}.adult", draft.agent_id)),
        format!("{}\n", draft.adult_feedback),
    )
}

/// Write `<root>/<scenario_id>/` with `drafts0/`, `comments/`, `drafts1/`,
/// `final.child`, `final.adult`, `transcript.log` and `bundle.json`.
pub fn write_run_dir(
    root: &Path,
    bundle: &FeedbackBundle,
    transcript: &DiscussionTranscript,
) -> io::Result<()> {
    let dir = root.join(&bundle.scenario_id);
    for sub in ["drafts0", "comments", "drafts1"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    for draft in &bundle.initial_drafts {
        write_draft(&dir.join("drafts0"), draft)?;
    }
    for draft in &bundle.refined_drafts {
        write_draft(&dir.join("drafts1"), draft)?;
    }
    for c in &bundle.comments {
        fs::write(
            dir.join("comments")
                .join(format!("{}__{}.txt", c.from_agent, c.to_agent)),
            format!("{}\n", c.content),
        )?;
    }
    fs::write(dir.join("final.child"), format!("{}\n", bundle.final_child))?;
    fs::write(dir.join("final.adult"), format!("{}\n", bundle.final_adult))?;
    fs::write(dir.join("transcript.log"), transcript.to_log())?;
    let json = serde_json::to_string_pretty(bundle).expect("bundle serializes");
    fs::write(dir.join("bundle.json"), json + "\n")
}

/// Read `final.child` and `final.adult` back from a scenario run directory.
pub fn read_finals(scenario_dir: &Path) -> io::Result<(String, String)> {
    let read =
        |name: &str| fs::read_to_string(scenario_dir.join(name)).map(|s| s.trim_end().to_string());
    Ok((read("final.child")?, read("final.adult")?))
}
