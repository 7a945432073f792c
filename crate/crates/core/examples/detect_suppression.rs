//! Suppression detection, attribute estimation, bias description and the
//! two situation reports for one dialogue, offline.

use std::path::Path;

use famlens::backend::ScriptedProvider;
use famlens::detection::analyze;
use famlens::prompts::PromptSet;
use famlens::structured::AgentContext;
use famlens::{Dialogue, DialogueTurn, Speaker};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dialogue = Dialogue::new(
        "demo",
        vec![
            DialogueTurn::new(
                1,
                Speaker::Parent,
                "You scored 85? Your cousin got 100 again.",
            ),
            DialogueTurn::new(2, Speaker::Child, "...I know.").with_note("looks down"),
            DialogueTurn::new(
                3,
                Speaker::Parent,
                "You can do it if you try. Don't you want to be the best?",
            ),
            DialogueTurn::new(4, Speaker::Child, "Yeah. I guess."),
        ],
    )?;

    let provider = ScriptedProvider::from_dir(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scripted"),
    )?;
    let prompts = PromptSet::builtin("en")?;
    let ctx = AgentContext::new(&provider, &prompts);
    let analysis = analyze(&ctx, &dialogue)?;

    let s = analysis.suppression();
    println!(
        "suppression: {} at {}/5 (c = {})",
        s.category(),
        s.intensity(),
        s.confidence()
    );
    println!("  reason: {}", s.reason());
    let a = analysis.attributes();
    println!("attributes: {} aged {}", a.gender(), a.age());
    println!(
        "bias: {} (c = {})",
        analysis.bias().description(),
        analysis.bias().confidence()
    );
    println!("\n=== child report ===\n{}", analysis.child.render());
    println!("\n=== adult report ===\n{}", analysis.adult.render());
    println!("\n{} model calls", analysis.calls.len());
    Ok(())
}
