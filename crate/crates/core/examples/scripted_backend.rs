//! Fixture-driven chat provider: strict per-hash responses, per-tag
//! fallbacks and context templating.
//!
//! ```bash
//! cargo run --example scripted_backend
//! ```

use famlens::backend::{ChatProvider, ChatRequest, FnProvider, ScriptedProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let request = ChatRequest::new("narrator_note", "You narrate.", "Turn 3 so far...")
        .with_context("scenario_id", "s07")
        .with_context("turn", 3);
    let hash = request.prompt_hash();

    let provider = ScriptedProvider::new()
        .with_coarse(
            "narrator_note",
            "({{scenario_id}}, turn {{turn}}) {{choose:NONE|(sighs)|(looks away)}}",
        )
        .with_strict(
            "narrator_note",
            &hash,
            "(pinned response for this exact prompt)",
        );
    println!("strict:  {}", provider.complete(&request)?);

    let other = ChatRequest::new("narrator_note", "You narrate.", "A different prompt")
        .with_context("scenario_id", "s08")
        .with_context("turn", 4);
    println!("coarse:  {}", provider.complete(&other)?);

    match provider.complete(&ChatRequest::new("child_turn", "s", "u")) {
        Err(e) => println!("missing: {e}"),
        Ok(text) => println!("unexpected: {text}"),
    }

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scripted");
    let shipped = ScriptedProvider::from_dir(&dir)?;
    println!(
        "shipped fixture set: {} responses from {}",
        shipped.len(),
        dir.display()
    );

    let echo = FnProvider::new(|req| Ok(format!("echo of `{}`", req.tag)));
    println!("closure: {}", echo.complete(&request)?);
    Ok(())
}
