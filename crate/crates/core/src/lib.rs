//! Core of the chainshell expert-system shell: the knowledge model, the rule
//! language, the chaining inference engine and its explanations.

pub mod engine;
pub mod explain;
pub mod kb;
pub mod lang;
#[cfg(feature = "testkit")]
pub mod testkit;

/// The demo knowledge base: a small, illustrative (non-clinical) chest-symptom
/// rule base.
pub const DEMO_CHEST_KB: &str = include_str!("../examples/chest.kb");
