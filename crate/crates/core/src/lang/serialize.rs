use std::fmt::Write;

use super::escape_string;
use crate::kb::{Condition, KnowledgeBase, Rule, Test, VariableDecl};

/// Canonical text: declarations before rules, one item per line, two-space
/// indentation, single spaces around operators, blocks separated by a blank
/// line. A knowledge base with nothing in it serializes to the empty string.
pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut blocks = Vec::new();
    for rb in &kb.rulebases {
        let mut b = format!("rulebase {} {{\n", rb.id);
        for d in &rb.declarations {
            writeln!(b, "  {}", declaration(d)).unwrap();
        }
        let mut rules: Vec<&Rule> = rb.rules.iter().collect();
        rules.sort_by_key(|r| r.order_index);
        for r in rules {
            writeln!(b, "  {}", serialize_rule(r)).unwrap();
        }
        b.push_str("}\n");
        blocks.push(b);
    }
    if !kb.meta_rules.is_empty() {
        let mut b = String::from("meta {\n");
        for m in &kb.meta_rules {
            writeln!(
                b,
                "  when {} use {}",
                conditions(&m.antecedents),
                m.target_rulebase
            )
            .unwrap();
        }
        b.push_str("}\n");
        blocks.push(b);
    }
    if !kb.global_declarations.is_empty() {
        let mut b = String::from("global {\n");
        for d in &kb.global_declarations {
            writeln!(b, "  {}", declaration(d)).unwrap();
        }
        b.push_str("}\n");
        blocks.push(b);
    }
    blocks.join("\n")
}

/// One rule on one line, without indentation or newline.
pub fn serialize_rule(rule: &Rule) -> String {
    let mut s = format!(
        "rule {}: if {} then ",
        rule.id,
        conditions(&rule.antecedents)
    );
    let assigns: Vec<String> = rule
        .consequents
        .iter()
        .map(|a| format!("{} := {}", a.variable, a.value))
        .collect();
    s.push_str(&assigns.join(" and "));
    if let Some(rec) = &rule.recommendation {
        write!(s, " recommend \"{}\"", escape_string(rec)).unwrap();
    }
    s
}

fn declaration(d: &VariableDecl) -> String {
    let mut s = format!("var {}: {}", d.name, d.kind);
    if let Some(set) = &d.symbol_set {
        write!(s, " {{{}}}", set.join(", ")).unwrap();
    }
    if d.askable {
        write!(
            s,
            " ask \"{}\"",
            escape_string(d.prompt.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
    s
}

fn conditions(cs: &[Condition]) -> String {
    cs.iter().map(condition).collect::<Vec<_>>().join(" and ")
}

fn condition(c: &Condition) -> String {
    match &c.test {
        Test::Compare { op, value } => format!("{} {} {}", c.variable, op.symbol(), value),
        Test::In(values) => {
            let vs: Vec<String> = values.iter().map(ToString::to_string).collect();
            format!("{} in {{{}}}", c.variable, vs.join(", "))
        }
    }
}
