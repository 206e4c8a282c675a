//! Independent reference implementations used as test oracles. They share
//! only the data types with the engine, never its evaluation code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chainshell_core::engine::{Event, InferenceSession};
use chainshell_core::kb::{CmpOp, Condition, KnowledgeBase, RuleBase, Test, Value};

pub type Facts = BTreeMap<String, Value>;

fn num(v: &Value) -> f64 {
    match v {
        Value::Number(n) => *n,
        other => panic!("ordering test on non-number {other:?}"),
    }
}

/// `None` when the variable has no value.
pub fn holds(c: &Condition, facts: &Facts) -> Option<bool> {
    let v = facts.get(&c.variable)?;
    Some(match &c.test {
        Test::In(set) => set.contains(v),
        Test::Compare { op, value } => match op {
            CmpOp::Eq => v == value,
            CmpOp::Ne => v != value,
            CmpOp::Lt => num(v) < num(value),
            CmpOp::Le => num(v) <= num(value),
            CmpOp::Gt => num(v) > num(value),
            CmpOp::Ge => num(v) >= num(value),
        },
    })
}

pub fn satisfied(conds: &[Condition], facts: &Facts) -> bool {
    conds.iter().all(|c| holds(c, facts) == Some(true))
}

/// Brute-force forward fixpoint: rescan all rules from the top after every
/// firing, firing the first unfired rule whose conditions all hold; values
/// are write-once. Returns final facts and the fired rule ids in order.
pub fn fixpoint(rb: &RuleBase, initial: &[(String, Value)]) -> (Facts, Vec<String>) {
    let mut facts: Facts = initial.iter().cloned().collect();
    let mut fired: Vec<String> = Vec::new();
    loop {
        let next = rb
            .rules
            .iter()
            .find(|r| !fired.contains(&r.id) && satisfied(&r.antecedents, &facts));
        let Some(rule) = next else { break };
        for a in &rule.consequents {
            facts
                .entry(a.variable.clone())
                .or_insert_with(|| a.value.clone());
        }
        fired.push(rule.id.clone());
    }
    (facts, fired)
}

pub fn memory_values(s: &InferenceSession) -> Facts {
    s.memory()
        .facts()
        .map(|f| (f.variable.clone(), f.value.clone()))
        .collect()
}

pub fn fired_ids(s: &InferenceSession) -> Vec<String> {
    s.trace()
        .iter()
        .filter_map(|e| match &e.event {
            Event::RuleFired { rule, .. } => Some(rule.clone()),
            _ => None,
        })
        .collect()
}

pub fn asked(s: &InferenceSession) -> Vec<String> {
    s.trace()
        .iter()
        .filter_map(|e| match &e.event {
            Event::QuestionAsked { variable } => Some(variable.clone()),
            _ => None,
        })
        .collect()
}

/// Rules that can contribute to `goal`: those concluding it, and
/// transitively those concluding a variable their conditions test.
pub fn ancestry<'a>(rb: &'a RuleBase, goal: &str) -> Vec<&'a chainshell_core::kb::Rule> {
    let mut wanted: BTreeSet<&str> = BTreeSet::from([goal]);
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    loop {
        let before = chosen.len();
        for (i, r) in rb.rules.iter().enumerate() {
            if r.consequents
                .iter()
                .any(|a| wanted.contains(a.variable.as_str()))
                && chosen.insert(i)
            {
                wanted.extend(r.antecedents.iter().map(|c| c.variable.as_str()));
            }
        }
        if chosen.len() == before {
            break;
        }
    }
    chosen.into_iter().map(|i| &rb.rules[i]).collect()
}

pub fn first_rulebase(kb: &KnowledgeBase) -> &RuleBase {
    &kb.rulebases[0]
}
