use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{EngineError, WorkingMemory};
use crate::kb::{CmpOp, Condition, Rule, Test, Value};

/// Three-valued result of testing one condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    UnknownVariable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchResult {
    Satisfied,
    /// Index of the first condition that is false.
    Failed(usize),
    /// First condition whose variable has no fact, with nothing false before it.
    Incomplete {
        index: usize,
        variable: String,
    },
}

fn fault(c: &Condition, fact: &Value, operand: &Value) -> EngineError {
    EngineError::TypeFault(format!(
        "condition on `{}` compares {} value {fact} with {} value {operand}",
        c.variable,
        fact.kind(),
        operand.kind()
    ))
}

fn equal(c: &Condition, fact: &Value, operand: &Value) -> Result<bool, EngineError> {
    if fact.kind() != operand.kind() {
        return Err(fault(c, fact, operand));
    }
    Ok(fact == operand)
}

/// Evaluates `c` against the facts in `m`. A kind mismatch between fact and
/// operand cannot happen in a validated knowledge base and is reported as
/// an engine fault.
pub fn eval_condition(c: &Condition, m: &WorkingMemory) -> Result<Truth, EngineError> {
    let Some(fact) = m.value(&c.variable) else {
        return Ok(Truth::UnknownVariable);
    };
    let holds = match &c.test {
        Test::In(values) => {
            let mut any = false;
            for v in values {
                any |= equal(c, fact, v)?;
            }
            any
        }
        Test::Compare {
            op: CmpOp::Eq,
            value,
        } => equal(c, fact, value)?,
        Test::Compare {
            op: CmpOp::Ne,
            value,
        } => !equal(c, fact, value)?,
        Test::Compare { op, value } => {
            let (Value::Number(a), Value::Number(b)) = (fact, value) else {
                return Err(fault(c, fact, value));
            };
            let Some(ord) = a.partial_cmp(b) else {
                return Err(fault(c, fact, value));
            };
            match op {
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
                CmpOp::Eq | CmpOp::Ne => unreachable!("handled above"),
            }
        }
    };
    Ok(if holds { Truth::True } else { Truth::False })
}

/// Left-to-right match: the first condition that is not true decides.
pub fn match_rule(r: &Rule, m: &WorkingMemory) -> Result<MatchResult, EngineError> {
    for (i, c) in r.antecedents.iter().enumerate() {
        match eval_condition(c, m)? {
            Truth::True => {}
            Truth::False => return Ok(MatchResult::Failed(i)),
            Truth::UnknownVariable => {
                return Ok(MatchResult::Incomplete {
                    index: i,
                    variable: c.variable.clone(),
                })
            }
        }
    }
    Ok(MatchResult::Satisfied)
}
