//! Multi-agent analysis of parent–child dialogue.
//!
//! The pipeline reads a dialogue transcript, detects the child's suppressed
//! emotion and the parent's implicit expectations ("ideal parent bias"),
//! assembles audience-specific situation reports, selects a five-member
//! expert panel from a pool of fifty role-playing profiles, and runs a
//! four-step discussion (draft, peer comment, refine, integrate) that ends in
//! one feedback text for the child and one for the parent. The same
//! role-play machinery generates synthetic corpora and simulates follow-up
//! dialogues after feedback, and [`eval`] scores every stage.
//!
//! All model access goes through [`backend::ChatProvider`] and
//! [`backend::EmbeddingProvider`]. The scripted and hash-based providers make
//! every stage a pure function of its inputs and fixture set, which is what
//! the test suite relies on.

pub mod backend;
pub mod cli;
pub mod detection;
pub mod discussion;
pub mod eval;
pub mod exec;
pub mod experts;
pub mod model;
pub mod prompts;
pub mod simulate;
pub mod structured;

pub use model::*;
