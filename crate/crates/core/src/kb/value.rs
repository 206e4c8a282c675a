use std::fmt;

use serde::{Deserialize, Serialize};

/// The kind of a variable or value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Bool,
    Number,
    Text,
    Symbol,
}

impl ValueKind {
    pub const ALL: [ValueKind; 4] = [
        ValueKind::Bool,
        ValueKind::Number,
        ValueKind::Text,
        ValueKind::Symbol,
    ];

    /// Keyword used by the rule language and the interchange format.
    pub fn keyword(self) -> &'static str {
        match self {
            ValueKind::Bool => "bool",
            ValueKind::Number => "number",
            ValueKind::Text => "text",
            ValueKind::Symbol => "symbol",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ValueKind> {
        ValueKind::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A typed value. Numbers compare with exact 64-bit equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
    Symbol(String),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Bool(_) => ValueKind::Bool,
            Value::Number(_) => ValueKind::Number,
            Value::Text(_) => ValueKind::Text,
            Value::Symbol(_) => ValueKind::Symbol,
        }
    }

    pub fn symbol(name: impl Into<String>) -> Value {
        Value::Symbol(name.into())
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    /// Parses the textual form of a value of a known kind, as typed by a user
    /// at a prompt or written in a facts file. Text accepts either a quoted
    /// literal or the raw input.
    pub fn parse_as(kind: ValueKind, input: &str) -> Option<Value> {
        let input = input.trim();
        match kind {
            ValueKind::Bool => match input {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            ValueKind::Number => crate::lang::parse_number(input).map(Value::Number),
            ValueKind::Symbol => crate::lang::is_identifier(input).then(|| Value::symbol(input)),
            ValueKind::Text => {
                if input.len() >= 2 && input.starts_with('"') && input.ends_with('"') {
                    crate::lang::unescape_string(&input[1..input.len() - 1]).map(Value::Text)
                } else {
                    Some(Value::text(input))
                }
            }
        }
    }
}

/// Renders values the way the rule language writes them: symbols bare,
/// text quoted and escaped, numbers in shortest round-trip form.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "\"{}\"", crate::lang::escape_string(s)),
            Value::Symbol(s) => f.write_str(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_shape_is_kind_tagged() {
        let v = Value::symbol("purulent");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"kind":"symbol","value":"purulent"}"#);
        let back: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn equality_is_per_kind() {
        assert_ne!(Value::symbol("a"), Value::text("a"));
        assert_eq!(Value::Number(0.1 + 0.2), Value::Number(0.1 + 0.2));
        assert_ne!(Value::Number(0.1 + 0.2), Value::Number(0.3));
    }

    #[test]
    fn parse_as_kind() {
        assert_eq!(
            Value::parse_as(ValueKind::Bool, " true "),
            Some(Value::Bool(true))
        );
        assert_eq!(Value::parse_as(ValueKind::Bool, "yes"), None);
        assert_eq!(
            Value::parse_as(ValueKind::Number, "-2.5"),
            Some(Value::Number(-2.5))
        );
        assert_eq!(Value::parse_as(ValueKind::Number, "abc"), None);
        assert_eq!(
            Value::parse_as(ValueKind::Symbol, "clear"),
            Some(Value::symbol("clear"))
        );
        assert_eq!(Value::parse_as(ValueKind::Symbol, "two words"), None);
        assert_eq!(
            Value::parse_as(ValueKind::Text, "\"a\\\"b\""),
            Some(Value::text("a\"b"))
        );
        assert_eq!(
            Value::parse_as(ValueKind::Text, "plain words"),
            Some(Value::text("plain words"))
        );
    }

    #[test]
    fn display_matches_rule_language() {
        assert_eq!(Value::Number(1.0).to_string(), "1");
        assert_eq!(Value::Number(0.25).to_string(), "0.25");
        assert_eq!(
            Value::text("say \"hi\"\n").to_string(),
            "\"say \\\"hi\\\"\\n\""
        );
        assert_eq!(Value::Bool(false).to_string(), "false");
    }
}
