use serde::{Deserialize, Serialize};

use crate::kb::Value;

/// A variable's value as used by a firing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub variable: String,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    /// The condition evaluated false.
    False,
    /// The condition's variable could not be established.
    Unestablished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    RuleFired {
        rule: String,
        bindings: Vec<Binding>,
    },
    RuleFailed {
        rule: String,
        condition: usize,
        reason: FailReason,
    },
    QuestionAsked {
        variable: String,
    },
    /// `value` is absent when the user answered unknown.
    AnswerReceived {
        variable: String,
        value: Option<Value>,
    },
    ConflictSkipped {
        rule: String,
        variable: String,
    },
    SubgoalPushed {
        variable: String,
    },
    SubgoalResolved {
        variable: String,
        established: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}
