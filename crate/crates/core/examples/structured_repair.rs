//! Validate model output and re-ask with the violation until it conforms.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use famlens::backend::{ChatRequest, FnProvider};
use famlens::detection::parse_suppression;
use famlens::prompts::PromptSet;
use famlens::structured::{AgentContext, AgentError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompts = PromptSet::builtin("en")?;
    let replies = [
        "I think the child is anxious.",
        r#"{"s": 7, "suppression_type": "anxiety", "reason": "short answers", "c": 0.9}"#,
        r#"Sure: {"s": 4, "suppression_type": "anxiety", "reason": "short answers", "c": 0.9}"#,
    ];
    let n = Arc::new(AtomicUsize::new(0));
    let counter = n.clone();
    let provider = FnProvider::new(move |req: &ChatRequest| {
        let k = counter.fetch_add(1, Ordering::SeqCst);
        if let Some(last) = req.messages.last().filter(|_| req.messages.len() > 1) {
            println!(
                "repair prompt {k}: {}",
                last.content.lines().next().unwrap_or("")
            );
        }
        Ok(replies[k.min(replies.len() - 1)].to_string())
    });

    let ctx = AgentContext::new(&provider, &prompts).with_max_repairs(2);
    let request = ChatRequest::new("detect_suppression", "Return JSON.", "transcript...");
    let out = ctx.ask(request.clone(), parse_suppression)?;
    println!(
        "parsed after {} repairs: s={} type={} c={}",
        out.repair_attempts,
        out.parsed.intensity(),
        out.parsed.category(),
        out.parsed.confidence()
    );

    let strict = AgentContext::new(&provider, &prompts).with_max_repairs(0);
    n.store(1, Ordering::SeqCst);
    match strict.ask(request, parse_suppression) {
        Err(AgentError::Invalid {
            attempts,
            violation,
            ..
        }) => println!("no repairs allowed: {attempts} attempt, {violation}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
