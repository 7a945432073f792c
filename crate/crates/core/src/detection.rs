//! Detection agents and the report-composing meta-agent.
//!
//! Three agents read the dialogue: suppressed emotion, child attributes and
//! parent bias. A meta-agent then writes one situation report per audience,
//! carrying the detection fields through untouched.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::exec::fan_out;
use crate::model::{
    AttributeReport, Audience, BiasCategory, BiasReport, DetectionSource, Dialogue, Gender,
    SituationReport, SuppressionCategory, SuppressionReport,
};
use crate::structured::{
    extract_json_object, get_f64, get_int, get_str, normalize_label, AgentContext, AgentError,
    CallRecord, StructuredOutput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Suppression,
    Attributes,
    Bias,
    ChildReport,
    AdultReport,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Suppression => "detect_suppression",
            Self::Attributes => "estimate_attributes",
            Self::Bias => "describe_bias",
            Self::ChildReport => "compose_child_report",
            Self::AdultReport => "compose_adult_report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stage {stage} failed: {source}")]
pub struct DetectionError {
    pub stage: Stage,
    #[source]
    pub source: AgentError,
}

/// Both situation reports for one dialogue plus every model call made.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub child: SituationReport,
    pub adult: SituationReport,
    pub calls: Vec<CallRecord>,
}

impl Analysis {
    pub fn suppression(&self) -> &SuppressionReport {
        self.child
            .suppression()
            .expect("child report carries suppression")
    }

    pub fn bias(&self) -> &BiasReport {
        self.adult.bias().expect("adult report carries bias")
    }

    pub fn attributes(&self) -> &AttributeReport {
        self.child.attributes()
    }
}

fn base_vars(d: &Dialogue) -> BTreeMap<&'static str, String> {
    let mut vars = BTreeMap::new();
    vars.insert("transcript", d.transcript(false));
    vars
}

/// Six categories as a comma-separated list.
pub fn suppression_category_list() -> String {
    SuppressionCategory::ALL
        .iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Bias categories with their example expressions, one per line.
pub fn bias_category_table() -> String {
    BiasCategory::ALL
        .iter()
        .map(|c| {
            let examples: Vec<String> = c.examples().iter().map(|e| format!("\"{e}\"")).collect();
            format!("- {} ({}): {}", c.label(), c.as_str(), examples.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_suppression(raw: &str) -> Result<SuppressionReport, String> {
    let obj = extract_json_object(raw)?;
    let s = get_int(&obj, "s")?;
    let label = get_str(&obj, "suppression_type")?;
    let category: SuppressionCategory = normalize_label(label).parse().map_err(|_| {
        format!(
            "suppression_type `{label}` is not one of: {}",
            suppression_category_list()
        )
    })?;
    let reason = get_str(&obj, "reason")?;
    let c = get_f64(&obj, "c")?;
    SuppressionReport::new(s, category, reason, c).map_err(|e| e.to_string())
}

pub fn parse_attributes(raw: &str) -> Result<AttributeReport, String> {
    let obj = extract_json_object(raw)?;
    let label = get_str(&obj, "gender")?;
    let gender: Gender = normalize_label(label)
        .parse()
        .map_err(|_| format!("gender `{label}` must be \"male\" or \"female\""))?;
    let age = get_int(&obj, "age")?;
    let background = get_str(&obj, "background")?;
    AttributeReport::new(gender, age, background).map_err(|e| e.to_string())
}

pub fn parse_bias(raw: &str) -> Result<BiasReport, String> {
    let obj = extract_json_object(raw)?;
    let description = get_str(&obj, "bias_description")?;
    let c = get_f64(&obj, "c")?;
    BiasReport::new(description, c).map_err(|e| e.to_string())
}

pub fn detect_suppression(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
) -> Result<StructuredOutput<SuppressionReport>, AgentError> {
    let mut vars = base_vars(d);
    vars.insert("categories", suppression_category_list());
    let req = ctx
        .request(Stage::Suppression.tag(), &vars)?
        .with_context("scenario_id", d.scenario_id());
    ctx.ask(req, parse_suppression)
}

pub fn estimate_attributes(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
) -> Result<StructuredOutput<AttributeReport>, AgentError> {
    let req = ctx
        .request(Stage::Attributes.tag(), &base_vars(d))?
        .with_context("scenario_id", d.scenario_id());
    ctx.ask(req, parse_attributes)
}

pub fn describe_bias(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
) -> Result<StructuredOutput<BiasReport>, AgentError> {
    let mut vars = base_vars(d);
    vars.insert("bias_categories", bias_category_table());
    let req = ctx
        .request(Stage::Bias.tag(), &vars)?
        .with_context("scenario_id", d.scenario_id());
    ctx.ask(req, parse_bias)
}

fn render_attributes(a: &AttributeReport) -> String {
    format!(
        "gender={} age={}\nbackground: {}",
        a.gender(),
        a.age(),
        a.background()
    )
}

fn compose(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
    source: DetectionSource,
    attributes: &AttributeReport,
) -> Result<StructuredOutput<SituationReport>, AgentError> {
    let mut vars = base_vars(d);
    vars.insert("attributes", render_attributes(attributes));
    let (audience, stage) = match &source {
        DetectionSource::Suppression(s) => {
            vars.insert(
                "suppression",
                format!(
                    "type={} intensity={}/5 confidence={}\nreason: {}",
                    s.category(),
                    s.intensity(),
                    s.confidence(),
                    s.reason()
                ),
            );
            (Audience::Child, Stage::ChildReport)
        }
        DetectionSource::Bias(b) => {
            vars.insert(
                "bias",
                format!("{}\nconfidence={}", b.description(), b.confidence()),
            );
            (Audience::Adult, Stage::AdultReport)
        }
    };
    let mut req = ctx
        .request(stage.tag(), &vars)?
        .with_context("scenario_id", d.scenario_id())
        .with_context("age", attributes.age());
    if let DetectionSource::Suppression(s) = &source {
        req = req
            .with_context("suppression_type", s.category())
            .with_context("intensity", s.intensity());
    }
    let out = ctx.ask_text(req)?;
    let report = SituationReport::new(
        audience,
        d.scenario_id(),
        out.parsed.trim(),
        source,
        attributes.clone(),
    )
    .map_err(|e| AgentError::Invalid {
        tag: stage.tag().to_string(),
        attempts: 1,
        violation: e.to_string(),
        raw: out.raw.clone(),
        calls: out.calls.clone(),
    })?;
    Ok(StructuredOutput {
        raw: out.raw,
        parsed: report,
        repair_attempts: 0,
        calls: out.calls,
    })
}

/// Meta-agent synthesis for the child. `o_sup` and `o_attr` are embedded
/// verbatim; only the summary text is generated.
pub fn compose_child_report(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
    o_sup: &SuppressionReport,
    o_attr: &AttributeReport,
) -> Result<StructuredOutput<SituationReport>, AgentError> {
    compose(ctx, d, DetectionSource::Suppression(o_sup.clone()), o_attr)
}

pub fn compose_adult_report(
    ctx: &AgentContext<'_>,
    d: &Dialogue,
    o_bias: &BiasReport,
    o_attr: &AttributeReport,
) -> Result<StructuredOutput<SituationReport>, AgentError> {
    compose(ctx, d, DetectionSource::Bias(o_bias.clone()), o_attr)
}

enum Detected {
    Suppression(StructuredOutput<SuppressionReport>),
    Attributes(StructuredOutput<AttributeReport>),
    Bias(StructuredOutput<BiasReport>),
}

/// Run all three detectors (concurrently, up to the context's cap) and
/// both compositions. Results and call order do not depend on scheduling.
pub fn analyze(ctx: &AgentContext<'_>, d: &Dialogue) -> Result<Analysis, DetectionError> {
    let stages = [Stage::Suppression, Stage::Attributes, Stage::Bias];
    let detected = fan_out(ctx.concurrency, &stages, |_, stage| {
        let result = match stage {
            Stage::Suppression => detect_suppression(ctx, d).map(Detected::Suppression),
            Stage::Attributes => estimate_attributes(ctx, d).map(Detected::Attributes),
            _ => describe_bias(ctx, d).map(Detected::Bias),
        };
        result.map_err(|source| DetectionError {
            stage: *stage,
            source,
        })
    });

    let mut calls = Vec::new();
    let mut sup = None;
    let mut attr = None;
    let mut bias = None;
    for result in detected {
        match result? {
            Detected::Suppression(o) => {
                calls.extend(o.calls);
                sup = Some(o.parsed);
            }
            Detected::Attributes(o) => {
                calls.extend(o.calls);
                attr = Some(o.parsed);
            }
            Detected::Bias(o) => {
                calls.extend(o.calls);
                bias = Some(o.parsed);
            }
        }
    }
    let (sup, attr, bias) = (sup.expect("ran"), attr.expect("ran"), bias.expect("ran"));

    let audiences = [Stage::ChildReport, Stage::AdultReport];
    let composed = fan_out(ctx.concurrency, &audiences, |_, stage| {
        let result = match stage {
            Stage::ChildReport => compose_child_report(ctx, d, &sup, &attr),
            _ => compose_adult_report(ctx, d, &bias, &attr),
        };
        result.map_err(|source| DetectionError {
            stage: *stage,
            source,
        })
    });
    let mut reports = Vec::with_capacity(2);
    for result in composed {
        let out = result?;
        calls.extend(out.calls);
        reports.push(out.parsed);
    }
    let adult = reports.pop().expect("adult");
    let child = reports.pop().expect("child");
    Ok(Analysis {
        child,
        adult,
        calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, FnProvider, ScriptedProvider};
    use crate::model::{DialogueTurn, Speaker};
    use crate::prompts::PromptSet;
    use std::sync::Mutex;

    fn dialogue() -> Dialogue {
        Dialogue::new(
            "s01",
            vec![
                DialogueTurn::new(1, Speaker::Parent, "You should join the baseball team."),
                DialogueTurn::new(2, Speaker::Child, "...okay."),
            ],
        )
        .unwrap()
    }

    const SUP: &str = r#"{"s": 4, "suppression_type": "anxiety", "reason": "He agrees but hides his worry.", "c": 0.85}"#;
    const ATTR: &str =
        r#"{"gender": "male", "age": 9, "background": "Father from a sports-elite family."}"#;
    const BIAS: &str =
        r#"{"bias_description": "Pressure to study harder and excel academically.", "c": 0.9}"#;

    fn scripted() -> ScriptedProvider {
        ScriptedProvider::new()
            .with_coarse("detect_suppression", SUP)
            .with_coarse("estimate_attributes", ATTR)
            .with_coarse("describe_bias", BIAS)
            .with_coarse(
                "compose_child_report",
                "A {{age}}-year-old showing {{suppression_type}} suppression at {{intensity}}/5.",
            )
            .with_coarse(
                "compose_adult_report",
                "The parent values athletic success.",
            )
    }

    #[test]
    fn suppression_fixture_parses() {
        let p = scripted();
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&p, &prompts);
        let out = detect_suppression(&ctx, &dialogue()).unwrap();
        assert_eq!(out.parsed.intensity(), 4);
        assert_eq!(out.parsed.category(), SuppressionCategory::Anxiety);
        assert_eq!(out.parsed.confidence(), 0.85);
        assert_eq!(out.repair_attempts, 0);
        assert_eq!(out.raw, SUP);
    }

    #[test]
    fn out_of_range_intensity_repairs_then_errors() {
        let seen = Mutex::new(Vec::new());
        let p = FnProvider::new(move |req| {
            seen.lock().unwrap().push(req.messages.len());
            Ok(r#"{"s": 7, "suppression_type": "anxiety", "reason": "r", "c": 0.5}"#.into())
        });
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&p, &prompts).with_max_repairs(1);
        let err = detect_suppression(&ctx, &dialogue()).unwrap_err();
        match err {
            AgentError::Invalid {
                attempts,
                violation,
                ..
            } => {
                assert_eq!(attempts, 2);
                assert!(violation.contains('s'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_then_fixed_is_accepted() {
        let p = FnProvider::new(|req| {
            Ok(if req.messages.len() == 1 {
                r#"{"s": 7, "suppression_type": "anxiety", "reason": "r", "c": 0.5}"#.into()
            } else {
                r#"{"s": 3, "suppression_type": "anxiety", "reason": "r", "c": 0.5}"#.into()
            })
        });
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&p, &prompts);
        let out = detect_suppression(&ctx, &dialogue()).unwrap();
        assert_eq!(out.parsed.intensity(), 3);
        assert_eq!(out.repair_attempts, 1);
    }

    #[test]
    fn unknown_category_and_bad_values_error() {
        let prompts = PromptSet::english();
        type StageFn = fn(&AgentContext<'_>, &Dialogue) -> Result<(), AgentError>;
        let cases: [(&str, StageFn); 3] = [
            (
                r#"{"s": 3, "suppression_type": "sadness", "reason": "r", "c": 0.5}"#,
                |ctx, d| detect_suppression(ctx, d).map(|_| ()),
            ),
            (
                r#"{"gender": "male", "age": 0, "background": "b"}"#,
                |ctx, d| estimate_attributes(ctx, d).map(|_| ()),
            ),
            (r#"{"bias_description": "d", "c": 1.3}"#, |ctx, d| {
                describe_bias(ctx, d).map(|_| ())
            }),
        ];
        for (reply, run) in cases {
            let p = FnProvider::new(move |_| Ok(reply.to_string()));
            let ctx = AgentContext::new(&p, &prompts);
            assert!(matches!(
                run(&ctx, &dialogue()),
                Err(AgentError::Invalid { attempts: 3, .. })
            ));
        }
    }

    #[test]
    fn bias_prompt_lists_all_categories() {
        let captured = Mutex::new(String::new());
        let p = FnProvider::new(move |req| {
            *captured.lock().unwrap() = req.rendered();
            let text = req.rendered();
            for c in BiasCategory::ALL {
                for e in c.examples() {
                    assert!(text.contains(e), "missing {e}");
                }
            }
            assert!(text.contains("Why can't you be like your sibling?"));
            Ok(BIAS.into())
        });
        for prompts in [PromptSet::english(), PromptSet::japanese()] {
            let ctx = AgentContext::new(&p, &prompts);
            let out = describe_bias(&ctx, &dialogue()).unwrap();
            assert_eq!(out.parsed.confidence(), 0.9);
        }
    }

    #[test]
    fn analyze_passes_fields_through_and_shares_attributes() {
        let p = scripted();
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&p, &prompts);
        let a = analyze(&ctx, &dialogue()).unwrap();
        assert_eq!(a.suppression(), &parse_suppression(SUP).unwrap());
        assert_eq!(a.bias(), &parse_bias(BIAS).unwrap());
        assert_eq!(a.child.attributes(), a.adult.attributes());
        assert_eq!(a.child.attributes(), &parse_attributes(ATTR).unwrap());
        assert_eq!(
            a.child.summary(),
            "A 9-year-old showing anxiety suppression at 4/5."
        );
        assert_eq!(a.calls.len(), 5);
        let tags: Vec<&str> = a.calls.iter().map(|c| c.tag.as_str()).collect();
        assert_eq!(
            tags,
            [
                "detect_suppression",
                "estimate_attributes",
                "describe_bias",
                "compose_child_report",
                "compose_adult_report"
            ]
        );
    }

    #[test]
    fn analyze_is_schedule_independent() {
        let p = scripted();
        let prompts = PromptSet::english();
        let serial = analyze(
            &AgentContext::new(&p, &prompts).with_concurrency(1),
            &dialogue(),
        )
        .unwrap();
        let parallel = analyze(
            &AgentContext::new(&p, &prompts).with_concurrency(4),
            &dialogue(),
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn failing_stage_is_named() {
        let p = scripted().with_coarse("estimate_attributes", "not json at all");
        let prompts = PromptSet::english();
        let err = analyze(&AgentContext::new(&p, &prompts), &dialogue()).unwrap_err();
        assert_eq!(err.stage, Stage::Attributes);
        assert!(err.to_string().contains("estimate_attributes"));

        let missing = FnProvider::new(|req| {
            if req.tag == "describe_bias" {
                Err(BackendError::Transport {
                    attempts: 4,
                    message: "down".into(),
                })
            } else {
                scripted().complete(req)
            }
        });
        let err = analyze(&AgentContext::new(&missing, &prompts), &dialogue()).unwrap_err();
        assert_eq!(err.stage, Stage::Bias);
        assert!(err.source.is_backend());
    }

    use crate::backend::ChatProvider;
}
