//! Externalized role prompts: list the built-in roles and render one.
//!
//! ```bash
//! cargo run --example prompt_templates -- ja
//! ```

use std::collections::BTreeMap;

use famlens::detection::suppression_category_list;
use famlens::prompts::{PromptSet, ROLES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let language = std::env::args().nth(1).unwrap_or_else(|| "en".into());
    let prompts = PromptSet::builtin(&language)?;
    println!("{} roles: {}", ROLES.len(), ROLES.join(", "));

    let mut vars = BTreeMap::new();
    vars.insert(
        "transcript",
        "parent: Did you finish your homework?\nchild: ...yes.".to_string(),
    );
    vars.insert("categories", suppression_category_list());
    let (system, user) = prompts.render_pair("detect_suppression", &vars)?;
    println!("\n--- system ---\n{system}\n--- user ---\n{user}");

    vars.remove("categories");
    if let Err(e) = prompts.render_pair("detect_suppression", &vars) {
        println!("\nmissing variable: {e}");
    }
    Ok(())
}
