//! Text rendering shared by the batch and interactive commands.

use chainshell_core::engine::{Event, FailReason, Outcome, Provenance, TraceEvent};
use chainshell_core::kb::Value;

/// Facts established by rules, sorted by variable, then recommendations in
/// firing order.
pub fn conclusions(outcome: &Outcome) -> String {
    let mut derived: Vec<_> = outcome
        .memory
        .facts()
        .filter(|f| matches!(f.provenance, Provenance::Derived(_)))
        .collect();
    derived.sort_by(|a, b| a.variable.cmp(&b.variable));
    let mut out = String::new();
    for f in derived {
        out.push_str(&format!("{} = {}\n", f.variable, f.value));
    }
    for r in &outcome.recommendations {
        out.push_str(&format!("recommend: {r}\n"));
    }
    out
}

fn binding_list(pairs: impl Iterator<Item = (String, Value)>) -> String {
    pairs.map(|(v, x)| format!("{v} = {x}")).collect::<Vec<_>>().join(", ")
}

/// One line per trace event, conditions numbered from 1.
pub fn trace(events: &[TraceEvent]) -> String {
    let mut out = String::from("trace:\n");
    for e in events {
        let line = match &e.event {
            Event::RuleFired { rule, bindings } => format!(
                "fired {rule}: {}",
                binding_list(bindings.iter().map(|b| (b.variable.clone(), b.value.clone())))
            ),
            Event::RuleFailed { rule, condition, reason } => {
                let reason = match reason {
                    FailReason::False => "false",
                    FailReason::Unestablished => "unestablished",
                };
                format!("failed {rule} at condition {}: {reason}", condition + 1)
            }
            Event::QuestionAsked { variable } => format!("asked {variable}"),
            Event::AnswerReceived { variable, value: Some(v) } => format!("answered {variable} = {v}"),
            Event::AnswerReceived { variable, value: None } => format!("answered {variable} unknown"),
            Event::ConflictSkipped { rule, variable } => format!("skipped {rule}: {variable} already set"),
            Event::SubgoalPushed { variable } => format!("subgoal {variable}"),
            Event::SubgoalResolved { variable, established } => format!(
                "resolved {variable}: {}",
                if *established { "established" } else { "not established" }
            ),
        };
        out.push_str(&format!("  {} {line}\n", e.seq));
    }
    out
}
