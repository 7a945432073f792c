//! Turn-by-turn role-play generation of annotated dialogues and of
//! follow-up dialogues after feedback.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::exec::fan_out;
use crate::model::{
    CsvError, Dialogue, DialogueTurn, MetadataError, ScenarioMetadata, Speaker, Topic,
};
use crate::structured::{AgentContext, AgentError, CallRecord};

pub const DEFAULT_TURN_COUNT: usize = 10;
pub const END_MARKER: &str = "[END]";
pub const NO_NOTE: &str = "NONE";
pub const POST_SUFFIX: &str = "-post";
pub const DEFAULT_STOP_CONDITIONS: &str =
    "Keep going until the final utterance; do not end the conversation early and do not write [END].";

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub turn_count: usize,
    /// Overrides the metadata's starter when set.
    pub starter: Option<Speaker>,
    /// Overrides the metadata's topic when set.
    pub seed_topic: Option<Topic>,
    pub stop_conditions: String,
    /// Ask the narrator for a note after every turn.
    pub narrate: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            turn_count: DEFAULT_TURN_COUNT,
            starter: None,
            seed_topic: None,
            stop_conditions: DEFAULT_STOP_CONDITIONS.to_string(),
            narrate: true,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.turn_count < 2 {
            return Err(SimulationError::Config(format!(
                "turn_count must be at least 2, got {}",
                self.turn_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("turn {turn} ({speaker}): {source}")]
    Turn {
        turn: usize,
        speaker: Speaker,
        #[source]
        source: AgentError,
    },
    #[error("narrator note for turn {turn}: {source}")]
    Narrator {
        turn: usize,
        #[source]
        source: AgentError,
    },
    #[error("model ended the conversation at turn {turn} of {expected}")]
    EarlyStop { turn: usize, expected: usize },
    #[error("generated dialogue is invalid: {0}")]
    Invalid(#[from] CsvError),
}

impl SimulationError {
    pub fn is_backend(&self) -> bool {
        match self {
            Self::Turn { source, .. } | Self::Narrator { source, .. } => source.is_backend(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dialogue: Dialogue,
    pub calls: Vec<CallRecord>,
}

struct Feedback<'a> {
    child: &'a str,
    adult: &'a str,
    original: String,
}

fn strip_label(text: &str, speaker: Speaker) -> String {
    let t = text.trim();
    let label = format!("{speaker}:");
    match t.get(..label.len()) {
        Some(head) if head.eq_ignore_ascii_case(&label) => t[label.len()..].trim().to_string(),
        _ => t.to_string(),
    }
}

fn turn_vars(
    ctx: &AgentContext<'_>,
    meta: &ScenarioMetadata,
    cfg: &GenerationConfig,
    speaker: Speaker,
    transcript: String,
    turn: usize,
    feedback: Option<&Feedback<'_>>,
) -> Result<BTreeMap<&'static str, String>, AgentError> {
    let topic = cfg.seed_topic.as_ref().unwrap_or(&meta.topic);
    let mut vars = BTreeMap::new();
    vars.insert("child_age", meta.child_persona.age.to_string());
    vars.insert("topic", topic.to_string());
    vars.insert("turn_count", cfg.turn_count.to_string());
    vars.insert("stop_conditions", cfg.stop_conditions.clone());
    vars.insert(
        "transcript",
        if transcript.is_empty() {
            "(none yet)".into()
        } else {
            transcript
        },
    );
    vars.insert("turn", turn.to_string());
    let role = match speaker {
        Speaker::Parent => {
            vars.insert("parent_gender", meta.parent_persona.gender.to_string());
            vars.insert(
                "upbringing",
                meta.parent_persona.upbringing_background.clone(),
            );
            vars.insert("bias_label", meta.bias.category.label().to_string());
            vars.insert("bias_strength", meta.bias.strength.to_string());
            vars.insert("formation", meta.bias.formation_background.clone());
            let section = format!("strength_{}", meta.bias.strength);
            vars.insert(
                "style_directive",
                ctx.prompts
                    .render_section("parent_turn", &section, &BTreeMap::new())?,
            );
            "parent_turn"
        }
        Speaker::Child => {
            vars.insert("personality", meta.child_persona.personality.clone());
            let directive = match &meta.suppression {
                None => ctx.prompts.render_section(
                    "child_turn",
                    "suppression_none",
                    &BTreeMap::new(),
                )?,
                Some(s) => {
                    let mut v = BTreeMap::new();
                    v.insert("suppression_category", s.category.to_string());
                    ctx.prompts.render_section(
                        "child_turn",
                        &format!("suppression_{}", s.strength),
                        &v,
                    )?
                }
            };
            vars.insert("suppression_directive", directive);
            "child_turn"
        }
    };
    let block = match feedback {
        None => String::new(),
        Some(f) => {
            let mut v = BTreeMap::new();
            let text = match speaker {
                Speaker::Parent => f.adult,
                Speaker::Child => f.child,
            };
            v.insert("feedback", text.to_string());
            v.insert("original_transcript", f.original.clone());
            ctx.prompts.render_section(role, "feedback", &v)?
        }
    };
    vars.insert("feedback_block", block);
    Ok(vars)
}

fn run_roleplay(
    ctx: &AgentContext<'_>,
    meta: &ScenarioMetadata,
    cfg: &GenerationConfig,
    scenario_id: &str,
    feedback: Option<&Feedback<'_>>,
) -> Result<Generated, SimulationError> {
    cfg.validate()?;
    let starter = cfg.starter.unwrap_or(meta.starter);
    let phase = if feedback.is_some() {
        "post"
    } else {
        "original"
    };
    let mut turns: Vec<DialogueTurn> = Vec::with_capacity(cfg.turn_count);
    let mut calls = Vec::new();
    let so_far = |turns: &[DialogueTurn], notes: bool| {
        Dialogue::new(scenario_id, turns.to_vec())
            .map(|d| d.transcript(notes))
            .unwrap_or_default()
    };

    for turn in 1..=cfg.turn_count {
        let speaker = if turn % 2 == 1 {
            starter
        } else {
            starter.other()
        };
        let wrap = |source| SimulationError::Turn {
            turn,
            speaker,
            source,
        };
        let vars = turn_vars(
            ctx,
            meta,
            cfg,
            speaker,
            so_far(&turns, false),
            turn,
            feedback,
        )
        .map_err(wrap)?;
        let role = match speaker {
            Speaker::Parent => "parent_turn",
            Speaker::Child => "child_turn",
        };
        let req = ctx
            .request(role, &vars)
            .map_err(wrap)?
            .with_context("scenario_id", scenario_id)
            .with_context("turn", turn)
            .with_context("speaker", speaker)
            .with_context("phase", phase);
        let out = ctx
            .ask(req, |raw| {
                let text = strip_label(raw, speaker);
                if text.is_empty() {
                    Err("the utterance is empty".to_string())
                } else {
                    Ok(text)
                }
            })
            .map_err(wrap)?;
        calls.extend(out.calls);
        if out.parsed.contains(END_MARKER) {
            return Err(SimulationError::EarlyStop {
                turn,
                expected: cfg.turn_count,
            });
        }
        turns.push(DialogueTurn::new(turn, speaker, out.parsed));

        if cfg.narrate {
            let mut vars = BTreeMap::new();
            vars.insert("transcript", so_far(&turns, true));
            vars.insert("turn", turn.to_string());
            let wrap = |source| SimulationError::Narrator { turn, source };
            let req = ctx
                .request("narrator_note", &vars)
                .map_err(wrap)?
                .with_context("scenario_id", scenario_id)
                .with_context("turn", turn)
                .with_context("phase", phase);
            let out = ctx.ask_text(req).map_err(wrap)?;
            calls.extend(out.calls);
            let note = out.parsed.trim();
            if !note.is_empty() && !note.eq_ignore_ascii_case(NO_NOTE) {
                let last = turns.pop().expect("turn just pushed");
                turns.push(last.with_note(note));
            }
        }
    }
    let dialogue = Dialogue::new(scenario_id, turns)?;
    Ok(Generated { dialogue, calls })
}

/// Generate one annotated dialogue from its persona metadata. Turns are
/// sequential; a failure discards the partial transcript.
pub fn generate_scenario(
    ctx: &AgentContext<'_>,
    meta: &ScenarioMetadata,
    cfg: &GenerationConfig,
) -> Result<Generated, SimulationError> {
    run_roleplay(ctx, meta, cfg, &meta.scenario_id, None)
}

/// Regenerate the conversation with the final feedback injected: the
/// parent prompt gets `final_adult`, the child prompt gets `final_child`.
/// The result's id is the original id with `-post` appended.
pub fn simulate_post_feedback(
    ctx: &AgentContext<'_>,
    meta: &ScenarioMetadata,
    original: &Dialogue,
    final_child: &str,
    final_adult: &str,
    cfg: &GenerationConfig,
) -> Result<Generated, SimulationError> {
    let feedback = Feedback {
        child: final_child,
        adult: final_adult,
        original: original.transcript(false),
    };
    let id = format!("{}{POST_SUFFIX}", original.scenario_id());
    run_roleplay(ctx, meta, cfg, &id, Some(&feedback))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioStatus {
    Ok,
    Failed { message: String, backend: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub scenario_id: String,
    pub status: ScenarioStatus,
    pub turn_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub entries: Vec<ManifestEntry>,
    pub calls: Vec<CallRecord>,
}

impl CorpusSummary {
    pub fn failed(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.status, ScenarioStatus::Failed { .. }))
            .count()
    }
}

/// Manifest CSV `scenario_id,status,turn_count`.
pub fn manifest_csv(entries: &[ManifestEntry]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario_id", "status", "turn_count"])
        .expect("in-memory write");
    for e in entries {
        let status = match e.status {
            ScenarioStatus::Ok => "ok",
            ScenarioStatus::Failed { .. } => "failed",
        };
        w.write_record([e.scenario_id.as_str(), status, &e.turn_count.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("flush to Vec")
}

/// Generate every scenario, concurrently across scenarios, and write
/// `<id>.csv`, `<id>.meta` and `manifest.csv` into `out_dir`. A failing
/// scenario is marked in the manifest (its message goes to `<id>.error`)
/// and does not affect the others.
pub fn generate_corpus(
    ctx: &AgentContext<'_>,
    metas: &[ScenarioMetadata],
    cfg: &GenerationConfig,
    out_dir: &Path,
) -> io::Result<CorpusSummary> {
    let results = fan_out(ctx.concurrency, metas, |_, meta| {
        generate_scenario(ctx, meta, cfg)
    });
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(metas.len());
    let mut calls = Vec::new();
    for (meta, result) in metas.iter().zip(results) {
        let id = &meta.scenario_id;
        fs::write(out_dir.join(format!("{id}.meta")), meta.to_toml())?;
        match result {
            Ok(g) => {
                fs::write(out_dir.join(format!("{id}.csv")), g.dialogue.to_csv())?;
                calls.extend(g.calls);
                entries.push(ManifestEntry {
                    scenario_id: id.clone(),
                    status: ScenarioStatus::Ok,
                    turn_count: g.dialogue.len(),
                });
            }
            Err(e) => {
                log::error!("{id}: {e}");
                fs::write(out_dir.join(format!("{id}.error")), format!("{e}\n"))?;
                entries.push(ManifestEntry {
                    scenario_id: id.clone(),
                    status: ScenarioStatus::Failed {
                        message: e.to_string(),
                        backend: e.is_backend(),
                    },
                    turn_count: 0,
                });
            }
        }
    }
    fs::write(out_dir.join("manifest.csv"), manifest_csv(&entries))?;
    Ok(CorpusSummary { entries, calls })
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Dialogue {
        path: String,
        #[source]
        source: CsvError,
    },
    #[error("{path}: {source}")]
    Metadata {
        path: String,
        #[source]
        source: MetadataError,
    },
    #[error("{0}: no dialogues found")]
    Empty(String),
}

/// One corpus entry: the dialogue and, when present, its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub dialogue: Dialogue,
    pub meta: Option<ScenarioMetadata>,
}

/// Read every `<id>.csv` (and its `<id>.meta`) from a corpus directory,
/// ordered by scenario id.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CorpusError::Io { path, source }
    };
    let mut csvs: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_stem().is_some_and(|s| s != "manifest")
        })
        .collect();
    csvs.sort();
    if csvs.is_empty() {
        return Err(CorpusError::Empty(dir.display().to_string()));
    }
    let mut out = Vec::with_capacity(csvs.len());
    for path in csvs {
        let id = path
            .file_stem()
            .expect("filtered")
            .to_string_lossy()
            .to_string();
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let dialogue =
            Dialogue::from_csv(id.clone(), &bytes).map_err(|source| CorpusError::Dialogue {
                path: path.display().to_string(),
                source,
            })?;
        let meta_path = dir.join(format!("{id}.meta"));
        let meta = if meta_path.exists() {
            let bytes = fs::read(&meta_path).map_err(io_err(&meta_path))?;
            Some(
                ScenarioMetadata::from_bytes(&bytes).map_err(|source| CorpusError::Metadata {
                    path: meta_path.display().to_string(),
                    source,
                })?,
            )
        } else {
            None
        };
        out.push(CorpusEntry { dialogue, meta });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::backend::{BackendError, ChatRequest, FnProvider};
    use crate::prompts::PromptSet;

    const META: &str = r#"
scenario_id = "s01"
topic = "play"
starter = "parent"

[child_persona]
age = 9
personality = "shy and quiet"

[parent_persona]
gender = "male"
upbringing_background = "raised in a sports-elite family"

[bias]
category = "self_replication"
strength = 4
formation_background = "his father pushed him into baseball"

[suppression]
present = true
category = "anxiety"
strength = 3
"#;

    fn meta() -> ScenarioMetadata {
        ScenarioMetadata::from_toml(META).unwrap()
    }

    fn reply(req: &ChatRequest) -> Result<String, BackendError> {
        let turn = req.context.get("turn").cloned().unwrap_or_default();
        Ok(match req.tag.as_str() {
            "parent_turn" => format!("parent: You should practice more ({turn})."),
            "child_turn" => format!("...okay ({turn})."),
            "narrator_note" if turn == "2" => "The child swallows his reluctance.".into(),
            "narrator_note" => "NONE".into(),
            other => panic!("unexpected tag {other}"),
        })
    }

    fn recording() -> (FnProvider, Arc<Mutex<Vec<ChatRequest>>>) {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let sink = seen.clone();
        let p = FnProvider::new(move |req: &ChatRequest| {
            sink.lock().unwrap().push(req.clone());
            reply(req)
        });
        (p, seen)
    }

    #[test]
    fn ten_alternating_turns_with_notes() {
        let (provider, seen) = recording();
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&provider, &prompts);
        let g = generate_scenario(&ctx, &meta(), &GenerationConfig::default()).unwrap();
        let d = &g.dialogue;
        assert_eq!(d.len(), 10);
        for (i, t) in d.turns().iter().enumerate() {
            assert_eq!(t.index, i + 1);
            assert_eq!(
                t.speaker,
                if i % 2 == 0 {
                    Speaker::Parent
                } else {
                    Speaker::Child
                }
            );
        }
        assert_eq!(d.turns()[0].content, "You should practice more (1).");
        assert_eq!(
            d.turns()[1].narrator_note.as_deref(),
            Some("The child swallows his reluctance.")
        );
        assert!(d.turns()[2].narrator_note.is_none());
        assert_eq!(g.calls.len(), 20);
        assert_eq!(Dialogue::from_csv("s01", &d.to_csv()).unwrap(), *d);

        let seen = seen.lock().unwrap();
        let parent = seen.iter().find(|r| r.tag == "parent_turn").unwrap();
        assert!(parent.system_prompt.contains("Self-replication"));
        assert!(parent.system_prompt.contains("strength 4/5"));
        assert!(parent
            .system_prompt
            .contains("his father pushed him into baseball"));
        assert!(parent.system_prompt.contains("you have to..."));
        let child = seen.iter().find(|r| r.tag == "child_turn").unwrap();
        assert!(child.system_prompt.contains("9-year-old"));
        assert!(child.system_prompt.contains("shy and quiet"));
        assert!(child
            .system_prompt
            .contains("anxiety feelings and answer vaguely"));
    }

    #[test]
    fn minimal_run_and_starter_override() {
        let provider = FnProvider::new(reply);
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&provider, &prompts);
        let cfg = GenerationConfig {
            turn_count: 2,
            starter: Some(Speaker::Child),
            narrate: false,
            ..Default::default()
        };
        let g = generate_scenario(&ctx, &meta(), &cfg).unwrap();
        let speakers: Vec<_> = g.dialogue.turns().iter().map(|t| t.speaker).collect();
        assert_eq!(speakers, vec![Speaker::Child, Speaker::Parent]);
        assert_eq!(g.calls.len(), 2);
        let bad = GenerationConfig {
            turn_count: 1,
            ..Default::default()
        };
        assert!(matches!(
            generate_scenario(&ctx, &meta(), &bad),
            Err(SimulationError::Config(_))
        ));
    }

    #[test]
    fn early_stop_and_failure_name_the_turn() {
        let prompts = PromptSet::english();
        let stop = FnProvider::new(|req: &ChatRequest| {
            if req.tag == "child_turn" && req.context["turn"] == "4" {
                return Ok("fine. [END]".into());
            }
            reply(req)
        });
        let err = generate_scenario(
            &AgentContext::new(&stop, &prompts),
            &meta(),
            &GenerationConfig::default(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            SimulationError::EarlyStop {
                turn: 4,
                expected: 10
            }
        );
        let down = FnProvider::new(|req: &ChatRequest| {
            if req.context["turn"] == "7" {
                return Err(BackendError::EmptyResponse);
            }
            reply(req)
        });
        let err = generate_scenario(
            &AgentContext::new(&down, &prompts),
            &meta(),
            &GenerationConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SimulationError::Turn {
                turn: 7,
                speaker: Speaker::Parent,
                ..
            }
        ));
        assert!(err.is_backend());
    }

    #[test]
    fn feedback_reaches_only_its_audience() {
        let (provider, seen) = recording();
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&provider, &prompts);
        let original = generate_scenario(&ctx, &meta(), &GenerationConfig::default())
            .unwrap()
            .dialogue;
        seen.lock().unwrap().clear();
        let post = simulate_post_feedback(
            &ctx,
            &meta(),
            &original,
            "CHILD-MSG",
            "ADULT-MSG",
            &GenerationConfig::default(),
        )
        .unwrap()
        .dialogue;
        assert_eq!(post.scenario_id(), "s01-post");
        assert_eq!(post.len(), 10);
        for req in seen.lock().unwrap().iter() {
            let text = req.rendered();
            match req.tag.as_str() {
                "parent_turn" => assert!(text.contains("ADULT-MSG") && !text.contains("CHILD-MSG")),
                "child_turn" => assert!(text.contains("CHILD-MSG") && !text.contains("ADULT-MSG")),
                _ => assert!(!text.contains("CHILD-MSG") && !text.contains("ADULT-MSG")),
            }
        }
    }

    #[test]
    fn corpus_isolates_failures_and_is_stable() {
        let prompts = PromptSet::english();
        let provider = FnProvider::new(|req: &ChatRequest| {
            if req.context["scenario_id"] == "s02" {
                return Err(BackendError::EmptyResponse);
            }
            reply(req)
        });
        let ctx = AgentContext::new(&provider, &prompts);
        let metas: Vec<_> = (1..=3)
            .map(|i| ScenarioMetadata::from_toml(&META.replace("s01", &format!("s0{i}"))).unwrap())
            .collect();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let summary =
            generate_corpus(&ctx, &metas, &GenerationConfig::default(), a.path()).unwrap();
        generate_corpus(
            &ctx.with_concurrency(1),
            &metas,
            &GenerationConfig::default(),
            b.path(),
        )
        .unwrap();
        assert_eq!(summary.failed(), 1);
        let manifest = fs::read_to_string(a.path().join("manifest.csv")).unwrap();
        assert_eq!(
            manifest,
            "scenario_id,status,turn_count\ns01,ok,10\ns02,failed,0\ns03,ok,10\n"
        );
        for name in ["s01.csv", "s03.csv", "s02.meta", "manifest.csv"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
        let corpus = load_corpus(a.path()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].meta.as_ref().unwrap(), &metas[0]);
    }
}
