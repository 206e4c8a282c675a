//! Structured-document form of a knowledge base, used over the network.
//! Field names follow the type definitions; every value carries its kind:
//! `{"kind": "symbol", "value": "purulent"}`.

use serde_json::{json, Map, Value as Json};

use super::{is_identifier, ParseError};
use crate::kb::{
    Assignment, CmpOp, Condition, KnowledgeBase, MetaRule, Rule, RuleBase, Test, Value, ValueKind,
    VariableDecl,
};

pub fn encode_interchange(kb: &KnowledgeBase) -> Json {
    json!({
        "id": kb.id,
        "version": kb.version,
        "global_declarations": kb.global_declarations.iter().map(encode_decl).collect::<Vec<_>>(),
        "meta_rules": kb.meta_rules.iter().map(|m| json!({
            "antecedents": m.antecedents.iter().map(encode_condition).collect::<Vec<_>>(),
            "target_rulebase": m.target_rulebase,
        })).collect::<Vec<_>>(),
        "rulebases": kb.rulebases.iter().map(|rb| json!({
            "id": rb.id,
            "declarations": rb.declarations.iter().map(encode_decl).collect::<Vec<_>>(),
            "rules": rb.rules.iter().map(encode_rule).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn encode_decl(d: &VariableDecl) -> Json {
    json!({
        "name": d.name,
        "kind": d.kind.keyword(),
        "symbol_set": d.symbol_set,
        "askable": d.askable,
        "prompt": d.prompt,
    })
}

fn encode_value(v: &Value) -> Json {
    serde_json::to_value(v).expect("values always encode")
}

fn encode_condition(c: &Condition) -> Json {
    match &c.test {
        Test::Compare { op, value } => json!({
            "variable": c.variable,
            "operator": op.name(),
            "operand": encode_value(value),
        }),
        Test::In(values) => json!({
            "variable": c.variable,
            "operator": "in",
            "operand": values.iter().map(encode_value).collect::<Vec<_>>(),
        }),
    }
}

fn encode_rule(r: &Rule) -> Json {
    json!({
        "id": r.id,
        "order_index": r.order_index,
        "antecedents": r.antecedents.iter().map(encode_condition).collect::<Vec<_>>(),
        "consequents": r.consequents.iter().map(|a| json!({
            "variable": a.variable,
            "value": encode_value(&a.value),
        })).collect::<Vec<_>>(),
        "recommendation": r.recommendation,
    })
}

type DResult<T> = Result<T, ParseError>;

/// A JSON object being decoded, with the path used in error messages.
struct Obj<'a> {
    map: &'a Map<String, Json>,
    path: String,
}

fn child(path: &str, field: &str) -> String {
    if path.is_empty() {
        field.to_string()
    } else {
        format!("{path}.{field}")
    }
}

fn object<'a>(doc: &'a Json, path: String) -> DResult<Obj<'a>> {
    match doc {
        Json::Object(map) => Ok(Obj { map, path }),
        _ => Err(ParseError::at_path(path, "expected an object")),
    }
}

impl<'a> Obj<'a> {
    fn field(&self, name: &str) -> DResult<&'a Json> {
        self.map.get(name).ok_or_else(|| {
            ParseError::at_path(child(&self.path, name), format!("missing field `{name}`"))
        })
    }

    fn optional(&self, name: &str) -> Option<&'a Json> {
        self.map.get(name).filter(|v| !v.is_null())
    }

    fn string(&self, name: &str) -> DResult<String> {
        match self.field(name)? {
            Json::String(s) => Ok(s.clone()),
            _ => Err(ParseError::at_path(
                child(&self.path, name),
                "expected a string",
            )),
        }
    }

    fn ident(&self, name: &str) -> DResult<String> {
        let s = self.string(name)?;
        check_ident(&s, &child(&self.path, name))?;
        Ok(s)
    }

    fn opt_string(&self, name: &str) -> DResult<Option<String>> {
        match self.optional(name) {
            None => Ok(None),
            Some(Json::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ParseError::at_path(
                child(&self.path, name),
                "expected a string or null",
            )),
        }
    }

    fn array(&self, name: &str) -> DResult<(&'a Vec<Json>, String)> {
        let path = child(&self.path, name);
        match self.field(name)? {
            Json::Array(items) => Ok((items, path)),
            _ => Err(ParseError::at_path(path, "expected an array")),
        }
    }

    fn natural(&self, name: &str) -> DResult<u64> {
        self.field(name)?.as_u64().ok_or_else(|| {
            ParseError::at_path(child(&self.path, name), "expected a non-negative integer")
        })
    }

    /// Decodes each element of an array field.
    fn each<T>(
        &self,
        name: &str,
        mut f: impl FnMut(&'a Json, String) -> DResult<T>,
    ) -> DResult<Vec<T>> {
        let (items, path) = self.array(name)?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| f(item, format!("{path}[{i}]")))
            .collect()
    }

    fn non_empty<T>(
        &self,
        name: &str,
        f: impl FnMut(&'a Json, String) -> DResult<T>,
    ) -> DResult<Vec<T>> {
        let items = self.each(name, f)?;
        if items.is_empty() {
            return Err(ParseError::at_path(
                child(&self.path, name),
                "must not be empty",
            ));
        }
        Ok(items)
    }
}

fn check_ident(s: &str, path: &str) -> DResult<()> {
    if is_identifier(s) {
        Ok(())
    } else {
        Err(ParseError::at_path(
            path,
            format!("`{s}` is not a valid identifier"),
        ))
    }
}

/// Decodes an interchange document. Errors name the path of the offending
/// element.
pub fn decode_interchange(doc: &Json) -> Result<KnowledgeBase, ParseError> {
    let o = object(doc, String::new())?;
    Ok(KnowledgeBase {
        id: o.ident("id")?,
        version: o.natural("version")?,
        global_declarations: o.each("global_declarations", decode_decl)?,
        meta_rules: o.each("meta_rules", |m, path| {
            let m = object(m, path)?;
            Ok(MetaRule {
                antecedents: m.non_empty("antecedents", decode_condition)?,
                target_rulebase: m.ident("target_rulebase")?,
            })
        })?,
        rulebases: o.each("rulebases", decode_rulebase)?,
    })
}

fn decode_rulebase(doc: &Json, path: String) -> DResult<RuleBase> {
    let o = object(doc, path)?;
    let rules = o.each("rules", decode_rule)?;
    let (_, rules_path) = o.array("rules")?;
    for (i, r) in rules.iter().enumerate() {
        if r.order_index != i {
            return Err(ParseError::at_path(
                format!("{rules_path}[{i}].order_index"),
                format!("expected order index {i}, found {}", r.order_index),
            ));
        }
    }
    Ok(RuleBase {
        id: o.ident("id")?,
        declarations: o.each("declarations", decode_decl)?,
        rules,
    })
}

fn decode_decl(doc: &Json, path: String) -> DResult<VariableDecl> {
    let o = object(doc, path)?;
    let kind_name = o.string("kind")?;
    let kind = ValueKind::from_keyword(&kind_name).ok_or_else(|| {
        ParseError::at_path(
            child(&o.path, "kind"),
            format!("unknown value kind `{kind_name}`"),
        )
    })?;
    let symbol_set = match o.optional("symbol_set") {
        None => None,
        Some(_) => Some(o.each("symbol_set", |s, path| match s {
            Json::String(s) => check_ident(s, &path).map(|_| s.clone()),
            _ => Err(ParseError::at_path(path, "expected a string")),
        })?),
    };
    let askable = match o.field("askable")? {
        Json::Bool(b) => *b,
        _ => {
            return Err(ParseError::at_path(
                child(&o.path, "askable"),
                "expected a boolean",
            ))
        }
    };
    let prompt = o.opt_string("prompt")?;
    if prompt.is_some() && !askable {
        return Err(ParseError::at_path(
            child(&o.path, "prompt"),
            "a prompt requires `askable` to be true",
        ));
    }
    Ok(VariableDecl {
        name: o.ident("name")?,
        kind,
        symbol_set,
        askable,
        prompt,
    })
}

fn decode_rule(doc: &Json, path: String) -> DResult<Rule> {
    let o = object(doc, path)?;
    let order_index = o.natural("order_index")?;
    Ok(Rule {
        id: o.ident("id")?,
        order_index: usize::try_from(order_index)
            .map_err(|_| ParseError::at_path(child(&o.path, "order_index"), "out of range"))?,
        antecedents: o.non_empty("antecedents", decode_condition)?,
        consequents: o.non_empty("consequents", |a, path| {
            let a = object(a, path)?;
            Ok(Assignment {
                variable: a.ident("variable")?,
                value: decode_value(a.field("value")?, child(&a.path, "value"))?,
            })
        })?,
        recommendation: o.opt_string("recommendation")?,
    })
}

fn decode_condition(doc: &Json, path: String) -> DResult<Condition> {
    let o = object(doc, path)?;
    let variable = o.ident("variable")?;
    let op_name = o.string("operator")?;
    let operand_path = child(&o.path, "operand");
    let test = if op_name == "in" {
        let values = o.non_empty("operand", decode_value)?;
        Test::In(values)
    } else {
        let op = CmpOp::ALL
            .into_iter()
            .find(|op| op.name() == op_name)
            .ok_or_else(|| {
                ParseError::at_path(
                    child(&o.path, "operator"),
                    format!("unknown operator `{op_name}`"),
                )
            })?;
        Test::Compare {
            op,
            value: decode_value(o.field("operand")?, operand_path)?,
        }
    };
    Ok(Condition { variable, test })
}

fn decode_value(doc: &Json, path: String) -> DResult<Value> {
    let o = object(doc, path)?;
    let kind_name = o.string("kind")?;
    let kind = ValueKind::from_keyword(&kind_name).ok_or_else(|| {
        ParseError::at_path(
            child(&o.path, "kind"),
            format!("unknown value kind `{kind_name}`"),
        )
    })?;
    let payload = o.field("value")?;
    let bad = || {
        ParseError::at_path(
            child(&o.path, "value"),
            format!("expected a {kind} payload"),
        )
    };
    Ok(match kind {
        ValueKind::Bool => Value::Bool(payload.as_bool().ok_or_else(bad)?),
        ValueKind::Number => {
            Value::Number(payload.as_f64().filter(|n| n.is_finite()).ok_or_else(bad)?)
        }
        ValueKind::Text => Value::Text(payload.as_str().ok_or_else(bad)?.to_string()),
        ValueKind::Symbol => {
            let s = payload.as_str().ok_or_else(bad)?;
            check_ident(s, &child(&o.path, "value"))?;
            Value::Symbol(s.to_string())
        }
    })
}
