//! Rebuilding sessions from their inputs. The engine is deterministic, so
//! replaying a knowledge-base version, the initial facts and the answers
//! reproduces the session exactly.

use std::sync::Arc;

use chainshell_core::engine::{start_session, EngineError, InferenceSession, Mode};
use chainshell_core::kb::KnowledgeBase;
use serde::Serialize;

use crate::store::{fact_entries, fact_pairs, SessionInputs};

/// Builds a mode from its name and optional goal.
pub fn parse_mode(mode: &str, goal: Option<&str>) -> Result<Mode, String> {
    match (mode, goal) {
        ("forward", None) => Ok(Mode::Forward),
        ("hybrid", None) => Ok(Mode::Hybrid),
        ("backward", Some(goal)) => Ok(Mode::Backward { goal: goal.to_string() }),
        ("backward", None) => Err("backward mode needs a goal".into()),
        ("forward" | "hybrid", Some(_)) => Err(format!("{mode} mode takes no goal")),
        _ => Err(format!("unknown mode `{mode}`: expected forward, backward or hybrid")),
    }
}

pub fn inputs_of(kb_id: &str, session: &InferenceSession) -> SessionInputs {
    SessionInputs {
        kb: kb_id.to_string(),
        kb_version: session.kb_version(),
        mode: session.mode().name().to_string(),
        goal: session.mode().goal().map(str::to_string),
        initial_facts: fact_entries(session.initial_facts()),
        answers: session.answers().to_vec(),
    }
}

/// Runs `inputs` through the engine again, answering each question with
/// the recorded answer for it.
pub fn replay(kb: Arc<KnowledgeBase>, inputs: &SessionInputs) -> Result<InferenceSession, EngineError> {
    let mode = parse_mode(&inputs.mode, inputs.goal.as_deref()).map_err(EngineError::InvalidState)?;
    let mut s = start_session(kb, mode, &fact_pairs(&inputs.initial_facts))?;
    for recorded in &inputs.answers {
        match s.question() {
            Some(q) if q.variable == recorded.variable => s = s.resume(recorded.answer.clone())?,
            _ => {
                return Err(EngineError::InvalidState(format!(
                    "recorded answer for `{}` does not match the session",
                    recorded.variable
                )))
            }
        }
    }
    Ok(s)
}

/// Compact JSON with object keys sorted.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("engine records always encode");
    serde_json::to_string(&tree).expect("json trees always encode")
}
