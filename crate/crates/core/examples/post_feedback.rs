//! Regenerate a dialogue with the final feedback injected into each role.

use std::fs;
use std::path::Path;

use famlens::backend::ScriptedProvider;
use famlens::prompts::PromptSet;
use famlens::simulate::{generate_scenario, simulate_post_feedback, GenerationConfig};
use famlens::structured::AgentContext;
use famlens::ScenarioMetadata;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let meta = ScenarioMetadata::from_bytes(&fs::read(root.join("metas/s03.meta"))?)?;
    let provider = ScriptedProvider::from_dir(&root.join("scripted"))?;
    let prompts = PromptSet::builtin("en")?;
    let ctx = AgentContext::new(&provider, &prompts);
    let cfg = GenerationConfig {
        turn_count: 4,
        ..GenerationConfig::default()
    };

    let original = generate_scenario(&ctx, &meta, &cfg)?.dialogue;
    let post = simulate_post_feedback(
        &ctx,
        &meta,
        &original,
        "It is okay to say what you feel, slowly.",
        "Ask open questions and wait for the answer.",
        &cfg,
    )?;
    println!(
        "== {} ==\n{}",
        original.scenario_id(),
        original.transcript(true)
    );
    println!(
        "\n== {} ==\n{}",
        post.dialogue.scenario_id(),
        post.dialogue.transcript(true)
    );
    Ok(())
}
