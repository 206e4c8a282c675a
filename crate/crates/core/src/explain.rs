//! WHY and HOW explanations. Both are rebuilt from a session's trace and
//! memory, so they stay available after the session ends.

use serde::{Deserialize, Serialize};

use crate::engine::{
    EngineError, Event, Fact, InferenceSession, Mode, Provenance, Status, TraceEvent, WorkingMemory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofNode {
    pub fact: Fact,
    pub justification: Justification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Justification {
    Given,
    Answered,
    /// One child per antecedent of the rule, in antecedent order.
    ByRule {
        rule: String,
        children: Vec<ProofNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhyEntry {
    pub rule: String,
    /// Zero-based index of the antecedent under pursuit.
    pub antecedent: usize,
    /// The variable the rule would establish.
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WhyTerminal {
    Goal { variable: String },
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhyChain {
    pub question: String,
    /// Innermost first.
    pub entries: Vec<WhyEntry>,
    pub terminal: WhyTerminal,
}

/// Rebuilds the proof of `variable` from the facts in `memory` and the
/// bindings recorded when rules fired. `None` when the variable has no fact.
pub fn proof_tree(
    memory: &WorkingMemory,
    trace: &[TraceEvent],
    variable: &str,
) -> Option<ProofNode> {
    let fact = memory.get(variable)?;
    let justification = match &fact.provenance {
        Provenance::Given => Justification::Given,
        Provenance::Answered => Justification::Answered,
        Provenance::Derived(rule) => {
            let bindings = trace.iter().find_map(|e| match &e.event {
                Event::RuleFired { rule: r, bindings } if r == rule => Some(bindings),
                _ => None,
            })?;
            let children = bindings
                .iter()
                .map(|b| proof_tree(memory, trace, &b.variable))
                .collect::<Option<Vec<_>>>()?;
            Justification::ByRule {
                rule: rule.clone(),
                children,
            }
        }
    };
    Some(ProofNode {
        fact: fact.clone(),
        justification,
    })
}

/// Why the pending question is being asked: the rule stack at this moment.
pub fn why(s: &InferenceSession) -> Result<WhyChain, EngineError> {
    let Status::NeedsAnswer(q) = s.status() else {
        return Err(EngineError::InvalidState("no question is pending".into()));
    };
    let entries = s
        .rule_stack()
        .into_iter()
        .rev()
        .map(|e| WhyEntry {
            rule: e.rule,
            antecedent: e.antecedent,
            goal: e.goal,
        })
        .collect();
    let terminal = match s.mode() {
        Mode::Backward { goal } => WhyTerminal::Goal {
            variable: goal.clone(),
        },
        _ => WhyTerminal::Hybrid,
    };
    Ok(WhyChain {
        question: q.variable.clone(),
        entries,
        terminal,
    })
}

/// How `variable` was established in the session so far.
pub fn how(s: &InferenceSession, variable: &str) -> Result<ProofNode, EngineError> {
    let rb = s.active_rulebase();
    if s.kb().resolve(rb, variable).is_none() {
        return Err(EngineError::UnknownVariable(variable.to_string()));
    }
    proof_tree(s.memory(), s.trace(), variable)
        .ok_or_else(|| EngineError::NoFact(variable.to_string()))
}

pub enum Explanation<'a> {
    Proof(&'a ProofNode),
    Why(&'a WhyChain),
}

impl<'a> From<&'a ProofNode> for Explanation<'a> {
    fn from(p: &'a ProofNode) -> Self {
        Explanation::Proof(p)
    }
}

impl<'a> From<&'a WhyChain> for Explanation<'a> {
    fn from(w: &'a WhyChain) -> Self {
        Explanation::Why(w)
    }
}

/// Renders an explanation as text, one line per node or chain link, each
/// line ending in a newline.
pub fn render_explanation<'a>(e: impl Into<Explanation<'a>>) -> String {
    let mut out = String::new();
    match e.into() {
        Explanation::Proof(p) => render_proof(p, 0, &mut out),
        Explanation::Why(w) => render_why(w, &mut out),
    }
    out
}

fn render_proof(p: &ProofNode, depth: usize, out: &mut String) {
    let tag = match &p.justification {
        Justification::Given => "given".to_string(),
        Justification::Answered => "answered".to_string(),
        Justification::ByRule { rule, .. } => format!("rule {rule}"),
    };
    out.push_str(&format!(
        "{}{} = {}  [{tag}]\n",
        "  ".repeat(depth),
        p.fact.variable,
        p.fact.value
    ));
    if let Justification::ByRule { children, .. } = &p.justification {
        for c in children {
            render_proof(c, depth + 1, out);
        }
    }
}

fn render_why(w: &WhyChain, out: &mut String) {
    let mut needed = &w.question;
    for (i, e) in w.entries.iter().enumerate() {
        let lead = if i == 0 {
            format!("asking {} because rule {} needs it", w.question, e.rule)
        } else {
            format!("  because rule {} needs {needed}", e.rule)
        };
        out.push_str(&format!(
            "{lead} (condition {}) to establish {}\n",
            e.antecedent + 1,
            e.goal
        ));
        needed = &e.goal;
    }
    let last = match &w.terminal {
        WhyTerminal::Goal { variable } => format!("{variable} is the goal"),
        WhyTerminal::Hybrid => "hybrid chaining tries every rule in order".to_string(),
    };
    if w.entries.is_empty() {
        out.push_str(&format!("asking {} because {last}\n", w.question));
    } else {
        out.push_str(&format!("  because {last}\n"));
    }
}
