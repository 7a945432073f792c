//! The four-step panel discussion: drafts, peer comments, refinement and
//! integration into one feedback text per audience.

use std::path::Path;

use famlens::backend::{HashEmbedder, ScriptedProvider};
use famlens::detection::analyze;
use famlens::discussion::{run_discussion, Step};
use famlens::experts::{
    rank_pool, select_panel, shipped_pool_dir, EmbeddingCache, ExpertPool, PairEmbedding,
};
use famlens::prompts::PromptSet;
use famlens::structured::AgentContext;
use famlens::{Dialogue, DialogueTurn, Speaker};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dialogue = Dialogue::new(
        "demo",
        vec![
            DialogueTurn::new(1, Speaker::Parent, "Boys don't cry over a lost game."),
            DialogueTurn::new(2, Speaker::Child, "I'm not crying."),
        ],
    )?;
    let provider = ScriptedProvider::from_dir(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scripted"),
    )?;
    let prompts = PromptSet::builtin("en")?;
    let ctx = AgentContext::new(&provider, &prompts).with_concurrency(4);
    let pool = ExpertPool::load(&shipped_pool_dir())?;

    let a = analyze(&ctx, &dialogue)?;
    let ranked = rank_pool(
        &pool,
        &a.child,
        &a.adult,
        &HashEmbedder::default(),
        PairEmbedding::Concat,
        &EmbeddingCache::new(),
        4,
    )?;
    let (panel, _) = select_panel(&ctx, &pool, &ranked, &a.child, &a.adult)?;
    let (bundle, transcript) = run_discussion(&ctx, &pool, &panel, &dialogue, &a.child, &a.adult)?;

    for step in Step::ALL {
        println!(
            "step {} ({}): {} calls",
            step.number(),
            step.tag(),
            transcript.calls_in(step)
        );
    }
    println!(
        "total: {} calls, {} comments",
        transcript.calls.len(),
        bundle.comments.len()
    );
    println!(
        "\nfor the child:\n  {}\nfor the parent:\n  {}",
        bundle.final_child, bundle.final_adult
    );
    println!("\ntranscript log (first lines):");
    for line in transcript.to_log().lines().take(7) {
        println!("  {line}");
    }
    Ok(())
}
