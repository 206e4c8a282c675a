//! Knowledge representation: typed variables, variable-operator-value
//! conditions, production rules grouped into rule bases, and the meta-rules
//! that pick a rule base from the global context.
//!
//! All values here are immutable once built and may be shared freely between
//! threads.

mod graph;
mod validate;
mod value;

use serde::{Deserialize, Serialize};

pub use graph::{dependency_graph, DependencyGraph};
pub use validate::{validate_kb, Diagnostic, DiagnosticSite, Location, Severity};
pub use value::{Value, ValueKind};

use crate::engine::{eval_condition, Truth, WorkingMemory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: ValueKind,
    /// Ordered symbol set; present iff `kind` is symbol. Order matters only
    /// for presentation.
    pub symbol_set: Option<Vec<String>>,
    pub askable: bool,
    pub prompt: Option<String>,
}

impl VariableDecl {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Self {
        VariableDecl {
            name: name.into(),
            kind,
            symbol_set: None,
            askable: false,
            prompt: None,
        }
    }

    pub fn with_symbols<I, S>(mut self, symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.symbol_set = Some(symbols.into_iter().map(Into::into).collect());
        self
    }

    pub fn ask(mut self, prompt: impl Into<String>) -> Self {
        self.askable = true;
        self.prompt = Some(prompt.into());
        self
    }

    /// Whether `value` is acceptable for this variable: same kind and, for
    /// symbols, a member of the declared set.
    pub fn admits(&self, value: &Value) -> bool {
        if value.kind() != self.kind {
            return false;
        }
        match (value, &self.symbol_set) {
            (Value::Symbol(s), Some(set)) => set.iter().any(|m| m == s),
            (Value::Symbol(_), None) => false,
            _ => true,
        }
    }
}

/// Comparison operators of a condition other than set membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    /// The rule-language symbol.
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The interchange name.
    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Test {
    Compare {
        op: CmpOp,
        value: Value,
    },
    /// Membership in a non-empty set of values.
    In(Vec<Value>),
}

/// A variable-operator-value triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub variable: String,
    pub test: Test,
}

impl Condition {
    pub fn compare(variable: impl Into<String>, op: CmpOp, value: Value) -> Self {
        Condition {
            variable: variable.into(),
            test: Test::Compare { op, value },
        }
    }

    pub fn eq(variable: impl Into<String>, value: Value) -> Self {
        Self::compare(variable, CmpOp::Eq, value)
    }

    pub fn is_in(variable: impl Into<String>, values: Vec<Value>) -> Self {
        Condition {
            variable: variable.into(),
            test: Test::In(values),
        }
    }

    /// Values the condition mentions.
    pub fn operands(&self) -> &[Value] {
        match &self.test {
            Test::Compare { value, .. } => std::slice::from_ref(value),
            Test::In(values) => values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub variable: String,
    pub value: Value,
}

impl Assignment {
    pub fn new(variable: impl Into<String>, value: Value) -> Self {
        Assignment {
            variable: variable.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    /// Position in source order; ties everywhere are broken by this.
    pub order_index: usize,
    pub antecedents: Vec<Condition>,
    pub consequents: Vec<Assignment>,
    pub recommendation: Option<String>,
}

impl Rule {
    pub fn concludes(&self, variable: &str) -> bool {
        self.consequents.iter().any(|a| a.variable == variable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    pub id: String,
    pub declarations: Vec<VariableDecl>,
    pub rules: Vec<Rule>,
}

impl RuleBase {
    pub fn new(id: impl Into<String>) -> Self {
        RuleBase {
            id: id.into(),
            declarations: Vec::new(),
            rules: Vec::new(),
        }
    }

    pub fn declaration(&self, name: &str) -> Option<&VariableDecl> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Reassigns `order_index` to match list position.
    pub fn reindex(&mut self) {
        for (i, rule) in self.rules.iter_mut().enumerate() {
            rule.order_index = i;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRule {
    pub antecedents: Vec<Condition>,
    pub target_rulebase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub id: String,
    pub version: u64,
    pub global_declarations: Vec<VariableDecl>,
    pub meta_rules: Vec<MetaRule>,
    pub rulebases: Vec<RuleBase>,
}

/// Id given to knowledge bases parsed from text, which does not carry one.
pub const DEFAULT_KB_ID: &str = "kb";

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase {
            id: DEFAULT_KB_ID.to_string(),
            version: 0,
            global_declarations: Vec::new(),
            meta_rules: Vec::new(),
            rulebases: Vec::new(),
        }
    }
}

impl KnowledgeBase {
    pub fn rulebase(&self, id: &str) -> Option<&RuleBase> {
        self.rulebases.iter().find(|rb| rb.id == id)
    }

    pub fn rulebase_mut(&mut self, id: &str) -> Option<&mut RuleBase> {
        self.rulebases.iter_mut().find(|rb| rb.id == id)
    }

    pub fn global_declaration(&self, name: &str) -> Option<&VariableDecl> {
        self.global_declarations.iter().find(|d| d.name == name)
    }

    /// Resolves a variable as seen from inside `rb`: its own declarations
    /// first, then the global ones.
    pub fn resolve<'a>(&'a self, rb: &'a RuleBase, name: &str) -> Option<&'a VariableDecl> {
        rb.declaration(name)
            .or_else(|| self.global_declaration(name))
    }
}

/// Picks the rule base to run: the target of the topmost meta-rule whose
/// antecedents all hold in `global_context`, else the first rule base.
/// Returns `None` only for a knowledge base without rule bases.
pub fn select_rulebase<'a>(
    kb: &'a KnowledgeBase,
    global_context: &WorkingMemory,
) -> Option<&'a str> {
    let fired = kb.meta_rules.iter().find(|meta| {
        meta.antecedents
            .iter()
            .all(|c| matches!(eval_condition(c, global_context), Ok(Truth::True)))
    });
    match fired {
        Some(meta) => Some(meta.target_rulebase.as_str()),
        None => kb.rulebases.first().map(|rb| rb.id.as_str()),
    }
}
