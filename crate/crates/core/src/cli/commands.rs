use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{CliError, Runtime};
use crate::detection::{analyze, Analysis};
use crate::discussion::{read_finals, run_discussion, write_run_dir};
use crate::eval::{
    gold_csv, likert_summary, ratings_csv, read_predictions, read_ratings, summarize, system_csv,
    write_outputs, ConfidenceScale, GoldRecord, SystemPrediction,
};
use crate::exec::fan_out;
use crate::experts::{rank_pool, select_panel, EmbeddingCache};
use crate::model::{ScenarioMetadata, SituationReport};
use crate::simulate::{
    generate_corpus, load_corpus, manifest_csv, simulate_post_feedback, CorpusEntry, ManifestEntry,
    ScenarioStatus,
};
use crate::structured::CallRecord;

/// Per-scenario outcome collector; turns failures into one exit status.
#[derive(Default)]
struct Outcomes {
    total: usize,
    failures: Vec<(String, CliError)>,
}

impl Outcomes {
    fn record(&mut self, id: &str, result: Result<(), CliError>) {
        self.total += 1;
        if let Err(e) = result {
            log::error!("{id}: {e}");
            self.failures.push((id.to_string(), e));
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if self.failures.is_empty() {
            return Ok(());
        }
        let detail: Vec<String> = self
            .failures
            .iter()
            .map(|(id, e)| format!("{id}: {e}"))
            .collect();
        let msg = format!(
            "{} of {} scenarios failed; {}",
            self.failures.len(),
            self.total,
            detail.join("; ")
        );
        if self
            .failures
            .iter()
            .any(|(_, e)| matches!(e, CliError::Backend(_)))
        {
            Err(CliError::Backend(msg))
        } else {
            Err(CliError::Validation(msg))
        }
    }
}

fn classify(backend: bool, msg: String) -> CliError {
    if backend {
        CliError::Backend(msg)
    } else {
        CliError::Validation(msg)
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn status_csv(rows: &[(String, bool)]) -> String {
    let mut out = String::from("scenario_id,status\n");
    for (id, ok) in rows {
        let _ = writeln!(out, "{id},{}", if *ok { "ok" } else { "failed" });
    }
    out
}

fn calls_log(scenario: &str, calls: &[CallRecord]) -> String {
    let mut out = String::new();
    for c in calls {
        let _ = writeln!(
            out,
            "{scenario}\t{}\t{}\t{}\t{}\t{}",
            c.tag,
            c.agent.as_deref().unwrap_or("-"),
            c.attempt,
            c.prompt_hash,
            c.response_hash
        );
    }
    out
}

fn corpus(dir: &Path) -> Result<Vec<CorpusEntry>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "corpus directory {} does not exist",
            dir.display()
        )));
    }
    load_corpus(dir).map_err(|e| CliError::Validation(e.to_string()))
}

fn load_metas(path: &Path) -> Result<Vec<ScenarioMetadata>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "metadata path {} does not exist",
            path.display()
        )));
    }
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "meta" || x == "toml"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no metadata files in {}",
            path.display()
        )));
    }
    files
        .iter()
        .map(|f| {
            let bytes = fs::read(f).map_err(|e| CliError::io(f, e))?;
            ScenarioMetadata::from_bytes(&bytes)
                .map_err(|e| CliError::Validation(format!("{}: {e}", f.display())))
        })
        .collect()
}

/// Generate a corpus from metadata files.
pub fn cmd_generate(rt: &Runtime, metas: &Path, out: &Path) -> Result<(), CliError> {
    let metas = load_metas(metas)?;
    let ctx = rt.agent_context();
    let summary = generate_corpus(&ctx, &metas, &rt.config.generation(), out)
        .map_err(|e| CliError::io(out, e))?;
    write(&out.join("calls.log"), calls_log("corpus", &summary.calls))?;
    let mut outcomes = Outcomes::default();
    for e in &summary.entries {
        let result = match &e.status {
            ScenarioStatus::Ok => Ok(()),
            ScenarioStatus::Failed { message, backend } => Err(classify(*backend, message.clone())),
        };
        outcomes.record(&e.scenario_id, result);
    }
    outcomes.finish()
}

/// Analyze every dialogue; write report pairs, predictions and gold.
pub fn cmd_analyze(rt: &Runtime, corpus_dir: &Path, out: &Path) -> Result<(), CliError> {
    let entries = corpus(corpus_dir)?;
    create(out)?;
    let ctx = rt.agent_context();
    let results: Vec<Result<Analysis, CliError>> =
        fan_out(rt.config.concurrency_cap, &entries, |_, e| {
            analyze(&ctx, &e.dialogue)
                .map_err(|err| classify(err.source.is_backend(), err.to_string()))
        });
    let mut outcomes = Outcomes::default();
    let mut status = Vec::new();
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    let mut log = String::new();
    for (entry, result) in entries.iter().zip(results) {
        let id = entry.dialogue.scenario_id();
        let result = result.and_then(|a| {
            write(
                &out.join(format!("{id}.child.report")),
                a.child.to_json() + "\n",
            )?;
            write(
                &out.join(format!("{id}.adult.report")),
                a.adult.to_json() + "\n",
            )?;
            log.push_str(&calls_log(id, &a.calls));
            let sup = a.suppression();
            predictions.push(SystemPrediction {
                scenario_id: id.to_string(),
                predicted_suppression: sup.category(),
                predicted_intensity: sup.intensity(),
                system_confidence: sup.confidence(),
                predicted_age: a.attributes().age(),
            });
            Ok(())
        });
        if let Some(meta) = &entry.meta {
            if let Some(s) = &meta.suppression {
                gold.push(GoldRecord {
                    scenario_id: id.to_string(),
                    gold_suppression: s.category,
                    gold_age: meta.child_persona.age,
                    human_confidences: vec![],
                });
            }
        }
        status.push((id.to_string(), result.is_ok()));
        outcomes.record(id, result);
    }
    write(&out.join("predictions.csv"), system_csv(&predictions))?;
    if !gold.is_empty() {
        write(&out.join("gold.csv"), gold_csv(&gold))?;
    }
    write(&out.join("calls.log"), log)?;
    write(&out.join("status.csv"), status_csv(&status))?;
    outcomes.finish()
}

fn read_report(path: &Path) -> Result<SituationReport, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    SituationReport::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Select a panel and run the discussion for every analyzed scenario.
pub fn cmd_feedback(
    rt: &Runtime,
    corpus_dir: &Path,
    reports: &Path,
    out: &Path,
    ranking: bool,
) -> Result<(), CliError> {
    let entries = corpus(corpus_dir)?;
    let pool = rt.pool()?;
    create(out)?;
    let ctx = rt.agent_context();
    let cache = EmbeddingCache::new();
    let results = fan_out(rt.config.concurrency_cap, &entries, |_, e| {
        let id = e.dialogue.scenario_id();
        let r_child = read_report(&reports.join(format!("{id}.child.report")))?;
        let r_adult = read_report(&reports.join(format!("{id}.adult.report")))?;
        let ranked = rank_pool(
            &pool,
            &r_child,
            &r_adult,
            rt.embedder.as_ref(),
            rt.config.pair_embedding,
            &cache,
            rt.config.concurrency_cap,
        )
        .map_err(|err| CliError::Backend(err.to_string()))?;
        let (panel, selection_calls) = select_panel(&ctx, &pool, &ranked, &r_child, &r_adult)
            .map_err(|err| classify(err.is_backend(), err.to_string()))?;
        let (bundle, transcript) =
            run_discussion(&ctx, &pool, &panel, &e.dialogue, &r_child, &r_adult)
                .map_err(|err| classify(err.is_backend(), err.to_string()))?;
        Ok((ranked, panel, selection_calls, bundle, transcript))
    });
    let mut outcomes = Outcomes::default();
    let mut status = Vec::new();
    let mut panels = String::from("scenario_id,agent_1,agent_2,agent_3,agent_4,agent_5\n");
    for (entry, result) in entries.iter().zip(results) {
        let id = entry.dialogue.scenario_id();
        let result = result.and_then(|(ranked, panel, selection_calls, bundle, transcript)| {
            write_run_dir(out, &bundle, &transcript).map_err(|e| CliError::io(out, e))?;
            let dir = out.join(id);
            write(&dir.join("selection.log"), calls_log(id, &selection_calls))?;
            let panel_json = serde_json::to_string_pretty(&panel).expect("panel serializes");
            write(&dir.join("panel.json"), panel_json + "\n")?;
            if ranking {
                write(&dir.join("ranking.csv"), ranked.to_csv())?;
            }
            let ids: Vec<String> = panel.members().iter().map(|a| a.to_string()).collect();
            let _ = writeln!(panels, "{id},{}", ids.join(","));
            Ok(())
        });
        status.push((id.to_string(), result.is_ok()));
        outcomes.record(id, result);
    }
    write(&out.join("panel.csv"), panels)?;
    write(&out.join("status.csv"), status_csv(&status))?;
    outcomes.finish()
}

/// Generate a `-post` dialogue for every scenario with final feedback.
pub fn cmd_simulate(
    rt: &Runtime,
    corpus_dir: &Path,
    feedback: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let entries = corpus(corpus_dir)?;
    create(out)?;
    let ctx = rt.agent_context();
    let cfg = rt.config.generation();
    let results = fan_out(rt.config.concurrency_cap, &entries, |_, e| {
        let id = e.dialogue.scenario_id();
        let meta = e.meta.as_ref().ok_or_else(|| {
            CliError::Validation(format!("{id}: no metadata beside the dialogue"))
        })?;
        let (final_child, final_adult) = read_finals(&feedback.join(id)).map_err(|err| {
            CliError::Validation(format!("{id}: final feedback unreadable: {err}"))
        })?;
        simulate_post_feedback(&ctx, meta, &e.dialogue, &final_child, &final_adult, &cfg)
            .map_err(|err| classify(err.is_backend(), err.to_string()))
    });
    let mut outcomes = Outcomes::default();
    let mut manifest = Vec::new();
    let mut log = String::new();
    for (entry, result) in entries.iter().zip(results) {
        let id = format!(
            "{}{}",
            entry.dialogue.scenario_id(),
            crate::simulate::POST_SUFFIX
        );
        let result = result.and_then(|g| {
            write(&out.join(format!("{id}.csv")), g.dialogue.to_csv())?;
            log.push_str(&calls_log(&id, &g.calls));
            Ok(g.dialogue.len())
        });
        manifest.push(ManifestEntry {
            scenario_id: id.clone(),
            status: match &result {
                Ok(_) => ScenarioStatus::Ok,
                Err(e) => ScenarioStatus::Failed {
                    message: e.to_string(),
                    backend: matches!(e, CliError::Backend(_)),
                },
            },
            turn_count: *result.as_ref().unwrap_or(&0),
        });
        outcomes.record(&id, result.map(|_| ()));
    }
    write(&out.join("manifest.csv"), manifest_csv(&manifest))?;
    write(&out.join("calls.log"), log)?;
    outcomes.finish()
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub predictions: PathBuf,
    pub gold: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub confidence_scale: ConfidenceScale,
    pub dump_ratings: bool,
    pub out: PathBuf,
}

/// Compute metrics and write `metrics.csv`, `confusion.csv`,
/// `likert_summary.csv` and `report.md`.
pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    for p in std::iter::once(&args.predictions)
        .chain(&args.gold)
        .chain(&args.ratings)
    {
        if !p.exists() {
            return Err(CliError::Usage(format!("{} does not exist", p.display())));
        }
    }
    let validation = |e: crate::eval::EvalError| CliError::Validation(e.to_string());
    let records = read_predictions(
        &args.predictions,
        args.gold.as_deref(),
        args.confidence_scale,
    )
    .map_err(validation)?;
    let summary = summarize(&records).map_err(validation)?;
    let ratings = args
        .ratings
        .as_deref()
        .map(read_ratings)
        .transpose()
        .map_err(validation)?;
    let likert = ratings
        .as_deref()
        .map(likert_summary)
        .transpose()
        .map_err(validation)?;
    write_outputs(&args.out, &summary, likert.as_ref()).map_err(|e| CliError::io(&args.out, e))?;
    if let (true, Some(r)) = (args.dump_ratings, &ratings) {
        write(&args.out.join("ratings_raw.csv"), ratings_csv(r))?;
    }
    Ok(())
}
