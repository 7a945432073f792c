//! Role-play corpus generation from persona metadata, with a manifest.
//!
//! ```bash
//! cargo run --example generate_corpus -- /tmp/famlens-corpus
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use famlens::backend::ScriptedProvider;
use famlens::prompts::PromptSet;
use famlens::simulate::{generate_corpus, load_corpus, GenerationConfig};
use famlens::structured::AgentContext;
use famlens::ScenarioMetadata;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("famlens-corpus"));
    let metas = ["s01", "s02", "s10"]
        .iter()
        .map(|id| {
            ScenarioMetadata::from_bytes(&fs::read(root.join(format!("metas/{id}.meta")))?)
                .map_err(Into::into)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;

    let provider = ScriptedProvider::from_dir(&root.join("scripted"))?;
    let prompts = PromptSet::builtin("en")?;
    let ctx = AgentContext::new(&provider, &prompts).with_concurrency(3);
    let cfg = GenerationConfig {
        turn_count: 6,
        ..GenerationConfig::default()
    };
    let summary = generate_corpus(&ctx, &metas, &cfg, &out)?;
    println!(
        "{}",
        String::from_utf8_lossy(&famlens::simulate::manifest_csv(&summary.entries))
    );

    for entry in load_corpus(&out)? {
        let d = &entry.dialogue;
        let meta = entry.meta.as_ref().expect("written beside the dialogue");
        println!(
            "== {} (bias {}, starter {}) ==",
            d.scenario_id(),
            meta.bias.category,
            d.starter()
        );
        println!("{}", d.transcript(true));
    }
    println!("written to {}", out.display());
    Ok(())
}
