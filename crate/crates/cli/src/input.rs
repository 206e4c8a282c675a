//! Facts and answers files: one `variable = value` per line, `#` starts a
//! comment, blank lines are ignored. Values are read according to the
//! variable's declared kind.

use chainshell_core::engine::{Allowed, Answer};
use chainshell_core::kb::{KnowledgeBase, Value, VariableDecl};

/// A line that could not be read, with its 1-based number.
#[derive(Debug, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Drops a trailing comment, leaving `#` inside quoted text alone.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// A declaration for `name` anywhere in the knowledge base: globals first,
/// then each rule base in order.
fn declaration<'a>(kb: &'a KnowledgeBase, name: &str) -> Option<&'a VariableDecl> {
    kb.global_declaration(name)
        .or_else(|| kb.rulebases.iter().find_map(|rb| rb.declaration(name)))
}

/// Splits the file into `(line number, variable, raw value)`.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>, LineError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| LineError { line: i + 1, message };
        let (var, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `variable = value`, found `{line}`")))?;
        let (var, value) = (var.trim(), value.trim());
        if var.is_empty() || value.is_empty() {
            return Err(err(format!("expected `variable = value`, found `{line}`")));
        }
        if out.iter().any(|(_, v, _)| v == var) {
            return Err(err(format!("`{var}` is given more than once")));
        }
        out.push((i + 1, var.to_string(), value.to_string()));
    }
    Ok(out)
}

fn typed(kb: &KnowledgeBase, line: usize, var: &str, value: &str) -> Result<Value, LineError> {
    let err = |message: String| LineError { line, message };
    let decl = declaration(kb, var).ok_or_else(|| err(format!("unknown variable `{var}`")))?;
    let allowed = Allowed::for_decl(decl);
    allowed
        .parse(value)
        .ok_or_else(|| err(format!("invalid value `{value}` for `{var}`: expected {}", allowed.describe())))
}

/// Reads a facts file.
pub fn parse_facts(kb: &KnowledgeBase, text: &str) -> Result<Vec<(String, Value)>, LineError> {
    entries(text)?
        .into_iter()
        .map(|(line, var, value)| Ok((var.clone(), typed(kb, line, &var, &value)?)))
        .collect()
}

/// Reads an answers file, where `unknown` refuses the question.
pub fn parse_answers(kb: &KnowledgeBase, text: &str) -> Result<Vec<(String, Answer)>, LineError> {
    entries(text)?
        .into_iter()
        .map(|(line, var, value)| {
            let answer = if value == "unknown" {
                if declaration(kb, &var).is_none() {
                    return Err(LineError {
                        line,
                        message: format!("unknown variable `{var}`"),
                    });
                }
                Answer::Unknown
            } else {
                Answer::Value(typed(kb, line, &var, &value)?)
            };
            Ok((var, answer))
        })
        .collect()
}
