//! Rank the 50-profile pool against a report pair by embedding similarity
//! and pick the five-member panel.

use famlens::backend::{FnProvider, HashEmbedder};
use famlens::experts::{
    rank_pool, select_panel, shipped_pool_dir, EmbeddingCache, ExpertPool, PairEmbedding,
};
use famlens::prompts::PromptSet;
use famlens::structured::AgentContext;
use famlens::{
    AttributeReport, Audience, BiasReport, DetectionSource, Gender, SituationReport,
    SuppressionCategory, SuppressionReport,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = ExpertPool::load(&shipped_pool_dir())?;
    let attrs = AttributeReport::new(Gender::Male, 10, "fourth grader, plays the piano")?;
    let child = SituationReport::new(
        Audience::Child,
        "demo",
        "The child hides disappointment about quitting piano lessons.",
        DetectionSource::Suppression(SuppressionReport::new(
            4,
            SuppressionCategory::SelfEsteem,
            "self-deprecating replies",
            0.85,
        )?),
        attrs.clone(),
    )?;
    let adult = SituationReport::new(
        Audience::Adult,
        "demo",
        "The mother compares the child with a gifted sibling.",
        DetectionSource::Bias(BiasReport::new(
            "social comparison with the older sibling",
            0.8,
        )?),
        attrs,
    )?;

    let embedder = HashEmbedder::default();
    let cache = EmbeddingCache::new();
    let ranked = rank_pool(
        &pool,
        &child,
        &adult,
        &embedder,
        PairEmbedding::Concat,
        &cache,
        4,
    )?;
    for (rank, e) in ranked.entries().iter().enumerate().take(5) {
        println!("{:>2}. {:<20} {:+.4}", rank + 1, e.agent_id, e.similarity);
    }
    println!(
        "    ... lower half starts at rank {}",
        ranked.lower_half_start()
    );

    let prompts = PromptSet::builtin("en")?;
    let chooser = FnProvider::new(|req| {
        let last = req.context["pool_size"].clone();
        Ok(format!(
            "{{\"picks\": [\"#{}\", {last}], \"rationale\": \"contrasting viewpoints\"}}",
            req.context["lower_start"]
        ))
    });
    let (panel, _) = select_panel(
        &AgentContext::new(&chooser, &prompts),
        &pool,
        &ranked,
        &child,
        &adult,
    )?;
    println!("\npanel:");
    for id in panel.members() {
        let p = pool.get(&id).expect("panel members come from the pool");
        println!("  {:<20} {} ({})", id, p.name, p.field);
    }
    println!(
        "diversity ranks {:?}, fallback = {}",
        panel.pick_ranks, panel.fallback
    );
    Ok(())
}
