//! The command line end to end in scripted mode: generate, analyze,
//! feedback, simulate and eval into one run directory.
//!
//! ```bash
//! cargo run --example pipeline -- /tmp/famlens-run
//! ```

use std::path::{Path, PathBuf};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let run = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("famlens-run"));
    let config = fixtures.join("scripted.toml");
    let (c, r) = (config.to_string_lossy(), |p: &str| {
        run.join(p).to_string_lossy().into_owned()
    });
    let metas = fixtures.join("metas").to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "generate".into(),
            "--config".into(),
            c.to_string(),
            "--metas".into(),
            metas,
            "--out".into(),
            r("corpus"),
        ],
        vec![
            "analyze".into(),
            "--config".into(),
            c.to_string(),
            "--corpus".into(),
            r("corpus"),
            "--out".into(),
            r("analysis"),
        ],
        vec![
            "feedback".into(),
            "--config".into(),
            c.to_string(),
            "--corpus".into(),
            r("corpus"),
            "--reports".into(),
            r("analysis"),
            "--out".into(),
            r("feedback"),
        ],
        vec![
            "simulate".into(),
            "--config".into(),
            c.to_string(),
            "--corpus".into(),
            r("corpus"),
            "--feedback".into(),
            r("feedback"),
            "--out".into(),
            r("post"),
        ],
        vec![
            "eval".into(),
            "--predictions".into(),
            r("analysis/predictions.csv"),
            "--gold".into(),
            r("analysis/gold.csv"),
            "--out".into(),
            r("eval"),
        ],
    ];
    for step in steps {
        let code =
            famlens::cli::run(std::iter::once("famlens".to_string()).chain(step.iter().cloned()));
        println!("famlens {:<9} -> exit {code}", step[0]);
        if code != 0 {
            std::process::exit(code);
        }
    }
    let metrics = std::fs::read_to_string(run.join("eval/metrics.csv")).unwrap_or_default();
    println!("\n{metrics}\nrun directory: {}", run.display());
}
