use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kb::Value;

/// How a fact entered working memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Supplied when the session started.
    Given,
    /// Supplied by the user in reply to a question.
    Answered,
    /// Asserted by the named rule when it fired.
    Derived(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub variable: String,
    pub value: Value,
    pub provenance: Provenance,
}

impl Fact {
    pub fn new(variable: impl Into<String>, value: Value, provenance: Provenance) -> Self {
        Fact {
            variable: variable.into(),
            value,
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    RuleBase(String),
}

/// The context of one inference run. Write-once: a variable, once set,
/// keeps its fact for the rest of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub scope: Scope,
    facts: BTreeMap<String, Fact>,
}

impl WorkingMemory {
    pub fn new(scope: Scope) -> Self {
        WorkingMemory {
            scope,
            facts: BTreeMap::new(),
        }
    }

    pub fn get(&self, variable: &str) -> Option<&Fact> {
        self.facts.get(variable)
    }

    pub fn value(&self, variable: &str) -> Option<&Value> {
        self.facts.get(variable).map(|f| &f.value)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.facts.contains_key(variable)
    }

    /// Inserts `fact` unless its variable is already set. Returns whether the
    /// fact was stored.
    pub fn insert(&mut self, fact: Fact) -> bool {
        if self.facts.contains_key(&fact.variable) {
            return false;
        }
        self.facts.insert(fact.variable.clone(), fact);
        true
    }

    /// Facts ordered by variable name.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}
