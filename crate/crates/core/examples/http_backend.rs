//! Chat and embedding clients for an OpenAI-compatible endpoint. The key is
//! read from `FAMLENS_API_KEY`; without it the example only prints the
//! configuration error.
//!
//! ```bash
//! FAMLENS_API_KEY=... cargo run --example http_backend -- https://api.openai.com/v1 gpt-4o-mini
//! ```

use std::sync::Arc;

use famlens::backend::{ChatProvider, ChatRequest, HttpChatProvider, HttpSettings, API_KEY_ENV};
use famlens::exec::InflightLimit;

fn main() {
    let mut args = std::env::args().skip(1);
    let base = args
        .next()
        .unwrap_or_else(|| "https://api.openai.com/v1".into());
    let model = args.next().unwrap_or_else(|| "gpt-4o-mini".into());
    let settings = match HttpSettings::from_env(&base, &model, API_KEY_ENV) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return;
        }
    };
    println!("retry delays: {:?}", settings.backoff.delays());
    let chat = HttpChatProvider::new(settings, Arc::new(InflightLimit::new(2)));
    let request = ChatRequest::new(
        "child_turn",
        "You are a nine-year-old child.",
        "Your parent asks how school was.",
    );
    match chat.complete(&request) {
        Ok(text) => println!("{}: {text}", chat.id()),
        Err(e) => eprintln!("request failed: {e}"),
    }
}
