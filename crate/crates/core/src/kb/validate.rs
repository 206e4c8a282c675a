use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    dependency_graph, Condition, KnowledgeBase, RuleBase, Test, Value, ValueKind, VariableDecl,
};
use crate::lang::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// The part of a rule base a diagnostic points at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticSite {
    Declaration(String),
    Rule,
    Antecedent(usize),
    Consequent(usize),
    MetaRule(usize),
    MetaAntecedent(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Location {
    pub rulebase: Option<String>,
    pub rule: Option<String>,
    pub site: Option<DiagnosticSite>,
    /// Filled in when the knowledge base came from source text.
    pub span: Option<SourceSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `rulebase:rule`, with `-` for absent parts.
    pub fn place(&self) -> String {
        let loc = self.location.as_ref();
        let rb = loc.and_then(|l| l.rulebase.as_deref()).unwrap_or("-");
        let rule = loc.and_then(|l| l.rule.as_deref()).unwrap_or("-");
        format!("{rb}:{rule}")
    }
}

/// `severity code rulebase:rule message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.severity,
            self.code,
            self.place(),
            self.message
        )
    }
}

struct Collector {
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Collector {
    fn push(
        &mut self,
        severity: Severity,
        code: &str,
        message: String,
        location: Option<Location>,
    ) {
        let d = Diagnostic {
            severity,
            code: code.to_string(),
            message,
            location,
        };
        match severity {
            Severity::Error => self.errors.push(d),
            Severity::Warning => self.warnings.push(d),
        }
    }

    fn error(&mut self, code: &str, message: String, location: Location) {
        self.push(Severity::Error, code, message, Some(location));
    }

    fn warning(&mut self, code: &str, message: String, location: Location) {
        self.push(Severity::Warning, code, message, Some(location));
    }
}

fn at(rulebase: Option<&str>, rule: Option<&str>, site: Option<DiagnosticSite>) -> Location {
    Location {
        rulebase: rulebase.map(str::to_string),
        rule: rule.map(str::to_string),
        site,
        span: None,
    }
}

/// Static consistency check of a knowledge base. Errors come first (in
/// knowledge-base order), then warnings. Pure: the same input always yields
/// the same list.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut out = Collector {
        errors: Vec::new(),
        warnings: Vec::new(),
    };

    if kb.rulebases.is_empty() {
        out.push(
            Severity::Error,
            "no-rulebase",
            "knowledge base must contain at least one rule base".into(),
            None,
        );
    }
    let mut seen_rb = HashSet::new();
    for rb in &kb.rulebases {
        if !seen_rb.insert(rb.id.as_str()) {
            out.error(
                "duplicate-rulebase",
                format!("rule base `{}` is defined more than once", rb.id),
                at(Some(&rb.id), None, None),
            );
        }
    }

    check_declarations(&mut out, None, &kb.global_declarations, &[]);

    let globals: HashMap<&str, &VariableDecl> = kb
        .global_declarations
        .iter()
        .map(|d| (d.name.as_str(), d))
        .collect();
    for (i, meta) in kb.meta_rules.iter().enumerate() {
        for (j, cond) in meta.antecedents.iter().enumerate() {
            let loc = at(None, None, Some(DiagnosticSite::MetaAntecedent(i, j)));
            check_condition(
                &mut out,
                cond,
                globals.get(cond.variable.as_str()).copied(),
                loc,
                true,
            );
        }
        if kb.rulebase(&meta.target_rulebase).is_none() {
            out.error(
                "unknown-rulebase",
                format!(
                    "meta-rule {} targets unknown rule base `{}`",
                    i + 1,
                    meta.target_rulebase
                ),
                at(None, None, Some(DiagnosticSite::MetaRule(i))),
            );
        }
    }

    for rb in &kb.rulebases {
        check_declarations(
            &mut out,
            Some(&rb.id),
            &rb.declarations,
            &kb.global_declarations,
        );
        check_rules(&mut out, kb, rb);
    }
    for rb in &kb.rulebases {
        check_provability(&mut out, kb, rb);
        check_cycles(&mut out, rb);
        check_shadowing(&mut out, rb);
    }

    let mut all = out.errors;
    all.extend(out.warnings);
    all
}

fn check_declarations(
    out: &mut Collector,
    rb: Option<&str>,
    decls: &[VariableDecl],
    globals: &[VariableDecl],
) {
    let mut seen = HashSet::new();
    for d in decls {
        let loc = || at(rb, None, Some(DiagnosticSite::Declaration(d.name.clone())));
        if !seen.insert(d.name.as_str()) {
            out.error(
                "duplicate-variable",
                format!("variable `{}` is declared more than once", d.name),
                loc(),
            );
        } else if globals.iter().any(|g| g.name == d.name) {
            out.error(
                "duplicate-variable",
                format!("variable `{}` is already declared globally", d.name),
                loc(),
            );
        }
        match (d.kind, &d.symbol_set) {
            (ValueKind::Symbol, None) => out.error(
                "missing-symbol-set",
                format!("symbol variable `{}` needs a symbol set", d.name),
                loc(),
            ),
            (ValueKind::Symbol, Some(set)) => {
                if set.is_empty() {
                    out.error(
                        "missing-symbol-set",
                        format!("symbol variable `{}` has an empty symbol set", d.name),
                        loc(),
                    );
                }
                let mut members = HashSet::new();
                for s in set {
                    if !members.insert(s.as_str()) {
                        out.error(
                            "duplicate-symbol",
                            format!("symbol `{s}` appears twice in the set of `{}`", d.name),
                            loc(),
                        );
                    }
                }
            }
            (kind, Some(_)) => out.error(
                "unexpected-symbol-set",
                format!(
                    "`{}` is of kind {kind} and cannot have a symbol set",
                    d.name
                ),
                loc(),
            ),
            (_, None) => {}
        }
        if d.askable && d.prompt.as_deref().is_none_or(|p| p.trim().is_empty()) {
            out.error(
                "missing-prompt",
                format!("askable variable `{}` needs a non-empty prompt", d.name),
                loc(),
            );
        }
    }
}

fn check_value(out: &mut Collector, decl: &VariableDecl, value: &Value, loc: &Location) {
    if value.kind() != decl.kind {
        out.error(
            "kind-mismatch",
            format!(
                "`{}` is of kind {} but is used with {} value {}",
                decl.name,
                decl.kind,
                value.kind(),
                value
            ),
            loc.clone(),
        );
    } else if !decl.admits(value) {
        out.error(
            "symbol-not-in-set",
            format!(
                "symbol `{value}` is not in the declared set of `{}`",
                decl.name
            ),
            loc.clone(),
        );
    }
}

fn check_condition(
    out: &mut Collector,
    cond: &Condition,
    decl: Option<&VariableDecl>,
    loc: Location,
    global: bool,
) {
    let Some(decl) = decl else {
        let scope = if global {
            "global variable"
        } else {
            "variable"
        };
        out.error(
            "undeclared-variable",
            format!("{scope} `{}` is not declared", cond.variable),
            loc,
        );
        return;
    };
    match &cond.test {
        Test::Compare { op, value } => {
            if op.is_ordering() && decl.kind != ValueKind::Number {
                out.error(
                    "invalid-operator",
                    format!(
                        "operator `{}` needs a number variable, `{}` is of kind {}",
                        op.symbol(),
                        decl.name,
                        decl.kind
                    ),
                    loc.clone(),
                );
            }
            check_value(out, decl, value, &loc);
        }
        Test::In(values) => {
            if values.is_empty() {
                out.error(
                    "empty-set",
                    format!("membership test on `{}` has an empty set", decl.name),
                    loc.clone(),
                );
            }
            for v in values {
                check_value(out, decl, v, &loc);
            }
        }
    }
}

fn check_rules(out: &mut Collector, kb: &KnowledgeBase, rb: &RuleBase) {
    let mut seen = HashSet::new();
    for (i, rule) in rb.rules.iter().enumerate() {
        let rb_id = Some(rb.id.as_str());
        let rule_id = Some(rule.id.as_str());
        if !seen.insert(rule.id.as_str()) {
            out.error(
                "duplicate-rule",
                format!("rule id `{}` is used more than once", rule.id),
                at(rb_id, rule_id, Some(DiagnosticSite::Rule)),
            );
        }
        if rule.order_index != i {
            out.error(
                "order-index",
                format!(
                    "rule `{}` has order index {} at position {i}",
                    rule.id, rule.order_index
                ),
                at(rb_id, rule_id, Some(DiagnosticSite::Rule)),
            );
        }
        if rule.antecedents.is_empty() || rule.consequents.is_empty() {
            out.error(
                "empty-rule",
                format!(
                    "rule `{}` needs at least one condition and one assignment",
                    rule.id
                ),
                at(rb_id, rule_id, Some(DiagnosticSite::Rule)),
            );
        }
        for (j, cond) in rule.antecedents.iter().enumerate() {
            let loc = at(rb_id, rule_id, Some(DiagnosticSite::Antecedent(j)));
            check_condition(out, cond, kb.resolve(rb, &cond.variable), loc, false);
        }
        let mut assigned = HashSet::new();
        for (j, assign) in rule.consequents.iter().enumerate() {
            let loc = at(rb_id, rule_id, Some(DiagnosticSite::Consequent(j)));
            if !assigned.insert(assign.variable.as_str()) {
                out.error(
                    "duplicate-assignment",
                    format!("rule `{}` assigns `{}` twice", rule.id, assign.variable),
                    loc.clone(),
                );
            }
            match kb.resolve(rb, &assign.variable) {
                Some(decl) => check_value(out, decl, &assign.value, &loc),
                None => out.error(
                    "undeclared-variable",
                    format!("variable `{}` is not declared", assign.variable),
                    loc,
                ),
            }
        }
    }
}

fn check_provability(out: &mut Collector, kb: &KnowledgeBase, rb: &RuleBase) {
    let concluded: HashSet<&str> = rb
        .rules
        .iter()
        .flat_map(|r| r.consequents.iter().map(|a| a.variable.as_str()))
        .collect();
    for rule in &rb.rules {
        let mut reported = HashSet::new();
        for (j, cond) in rule.antecedents.iter().enumerate() {
            let var = cond.variable.as_str();
            let Some(decl) = kb.resolve(rb, var) else {
                continue;
            };
            let is_global = rb.declaration(var).is_none();
            if decl.askable || is_global || concluded.contains(var) {
                continue;
            }
            if reported.insert(var) {
                out.warning(
                    "unprovable",
                    format!(
                        "`{var}` is neither askable, global, nor concluded by any rule; rule `{}` can never fire",
                        rule.id
                    ),
                    at(Some(&rb.id), Some(&rule.id), Some(DiagnosticSite::Antecedent(j))),
                );
            }
        }
    }
}

fn check_cycles(out: &mut Collector, rb: &RuleBase) {
    let graph = dependency_graph(rb);
    for component in graph.cycles() {
        let ids: Vec<&str> = component.iter().map(|&i| rb.rules[i].id.as_str()).collect();
        out.warning(
            "cycle",
            format!("rules {{{}}} depend on each other", ids.join(", ")),
            at(Some(&rb.id), Some(ids[0]), Some(DiagnosticSite::Rule)),
        );
    }
}

fn condition_key(c: &Condition) -> String {
    // serde_json output is a stable structural fingerprint
    serde_json::to_string(c).expect("conditions always serialize")
}

fn check_shadowing(out: &mut Collector, rb: &RuleBase) {
    let keys: Vec<BTreeSet<String>> = rb
        .rules
        .iter()
        .map(|r| r.antecedents.iter().map(condition_key).collect())
        .collect();
    for (i, rule) in rb.rules.iter().enumerate() {
        if let Some(earlier) = (0..i).find(|&e| keys[e] == keys[i]) {
            out.warning(
                "shadowed",
                format!(
                    "rule `{}` has the same conditions as earlier rule `{}`",
                    rule.id, rb.rules[earlier].id
                ),
                at(Some(&rb.id), Some(&rule.id), Some(DiagnosticSite::Rule)),
            );
        }
    }
}
