//! The inference engine: forward, backward and hybrid chaining over a
//! write-once working memory, run as a resumable step machine. The engine
//! performs no I/O; questions surface as [`Status::NeedsAnswer`] and are
//! answered with [`InferenceSession::resume`].

mod matching;
mod memory;
mod session;
mod trace;

pub use matching::{eval_condition, match_rule, MatchResult, Truth};
pub use memory::{Fact, Provenance, Scope, WorkingMemory};
pub use session::{
    backward_step, forward_chain, forward_step, hybrid_chain_step, prepare_session, start_session,
    step_bound, Allowed, Answer, AnsweredQuestion, GoalEntry, InferenceSession, Mode, Outcome,
    Question, RuleEntry, Status, Verdict,
};
pub use trace::{Binding, Event, FailReason, TraceEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("knowledge base is invalid: {0}")]
    InvalidKb(String),
    #[error("knowledge base has no rule base")]
    NoRuleBase,
    #[error("backward chaining needs a goal variable")]
    MissingGoal,
    #[error("unknown goal variable `{0}`")]
    UnknownGoal(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is given more than once")]
    DuplicateFact(String),
    #[error("invalid value {value} for `{variable}`: expected {expected}")]
    InvalidValue {
        variable: String,
        value: String,
        expected: String,
    },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("`{0}` has no fact")]
    NoFact(String),
    #[error("engine fault: {0}")]
    TypeFault(String),
    #[error("engine fault: session exceeded its step bound of {0}")]
    StepLimit(u64),
}
