//! The textual rule language and the structured interchange format.
//!
//! ```text
//! rulebase chest {
//!   var fever: bool ask "Does the patient have fever?"
//!   var suspicion: symbol {respiratory_infection}
//!   rule R1: if fever = true then suspicion := respiratory_infection
//! }
//! ```
//!
//! Parsing is purely syntactic; semantic checks live in
//! [`validate_kb`](crate::kb::validate_kb). Text does not carry a
//! knowledge-base id or version: parsed knowledge bases get
//! [`DEFAULT_KB_ID`](crate::kb::DEFAULT_KB_ID) and version 0.

mod interchange;
mod lexer;
mod parser;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use interchange::{decode_interchange, encode_interchange};
pub use lexer::{escape_string, parse_number, unescape_string};
pub use serialize::{serialize_kb, serialize_rule};

use crate::kb::{Diagnostic, DiagnosticSite, KnowledgeBase, Rule};

/// 1-based line and column (in characters) plus length in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

/// Where a parse error points: a span in source text, or a path into an
/// interchange document such as `rulebases[0].rules[2].consequents[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSite {
    Span(SourceSpan),
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct ParseError {
    pub message: String,
    pub site: ErrorSite,
    /// Token descriptions that would have been accepted.
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn span(&self) -> Option<SourceSpan> {
        match self.site {
            ErrorSite::Span(span) => Some(span),
            ErrorSite::Path(_) => None,
        }
    }

    pub(crate) fn at_path(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError {
            message: message.into(),
            site: ErrorSite::Path(path.into()),
            expected: Vec::new(),
        }
    }
}

/// `line:column message` or `path: message`.
impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.site {
            ErrorSite::Span(s) => write!(f, "{}:{} {}", s.line, s.column, self.message),
            ErrorSite::Path(p) => write!(f, "{p}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSpans {
    pub rule: SourceSpan,
    pub antecedents: Vec<SourceSpan>,
    pub consequents: Vec<SourceSpan>,
}

/// Source positions of the items of a parsed knowledge base, kept outside
/// the knowledge base itself so that structural equality ignores them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceMap {
    pub rulebases: Vec<SourceSpan>,
    pub declarations: Vec<Vec<(String, SourceSpan)>>,
    pub rules: Vec<Vec<RuleSpans>>,
    pub global_declarations: Vec<(String, SourceSpan)>,
    pub meta_rules: Vec<SourceSpan>,
}

impl SourceMap {
    /// Best span for a diagnostic: the exact condition or assignment when
    /// known, else the enclosing rule, declaration or rule base.
    pub fn locate(&self, kb: &KnowledgeBase, diagnostic: &Diagnostic) -> Option<SourceSpan> {
        let loc = diagnostic.location.as_ref()?;
        let rb_index = match &loc.rulebase {
            Some(id) => Some(kb.rulebases.iter().position(|rb| &rb.id == id)?),
            None => None,
        };
        match (&loc.site, rb_index) {
            (Some(DiagnosticSite::MetaRule(i) | DiagnosticSite::MetaAntecedent(i, _)), _) => {
                self.meta_rules.get(*i).copied()
            }
            (Some(DiagnosticSite::Declaration(name)), None) => self
                .global_declarations
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| *s),
            (Some(DiagnosticSite::Declaration(name)), Some(rb)) => self
                .declarations
                .get(rb)?
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| *s),
            (site, Some(rb)) => {
                let Some(rule_id) = &loc.rule else {
                    return self.rulebases.get(rb).copied();
                };
                let rule_pos = kb.rulebases[rb]
                    .rules
                    .iter()
                    .position(|r| &r.id == rule_id)?;
                let spans = self.rules.get(rb)?.get(rule_pos)?;
                match site {
                    Some(DiagnosticSite::Antecedent(i)) => spans.antecedents.get(*i).copied(),
                    Some(DiagnosticSite::Consequent(i)) => spans.consequents.get(*i).copied(),
                    _ => Some(spans.rule),
                }
            }
            (_, None) => None,
        }
    }

    /// Fills in `location.span` of every diagnostic this map can place.
    pub fn attach(&self, kb: &KnowledgeBase, diagnostics: &mut [Diagnostic]) {
        for d in diagnostics {
            let span = self.locate(kb, d);
            if let (Some(loc), Some(span)) = (d.location.as_mut(), span) {
                loc.span = Some(span);
            }
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !parser::KEYWORDS.contains(&s)
}

/// Parses rule-language text. On failure returns every error found; the
/// parser resynchronises at item boundaries.
pub fn parse_kb(source: &str) -> Result<KnowledgeBase, Vec<ParseError>> {
    parse_kb_with_spans(source).map(|(kb, _)| kb)
}

pub fn parse_kb_with_spans(source: &str) -> Result<(KnowledgeBase, SourceMap), Vec<ParseError>> {
    let mut p = parser::Parser::new(source);
    let kb = p.parse_kb();
    if p.errors.is_empty() {
        Ok((kb, p.spans))
    } else {
        Err(p.errors)
    }
}

/// Like [`parse_kb`] for raw bytes; invalid UTF-8 is reported at the first
/// offending byte.
pub fn parse_kb_bytes(source: &[u8]) -> Result<KnowledgeBase, Vec<ParseError>> {
    match std::str::from_utf8(source) {
        Ok(text) => parse_kb(text),
        Err(e) => {
            let valid = std::str::from_utf8(&source[..e.valid_up_to()]).expect("prefix is valid");
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(vec![ParseError {
                message: format!("invalid UTF-8 at byte offset {}", e.valid_up_to()),
                site: ErrorSite::Span(SourceSpan {
                    line,
                    column,
                    length: 1,
                }),
                expected: Vec::new(),
            }])
        }
    }
}

/// Parses exactly one `rule ...` item, as sent by the rule editor.
pub fn parse_rule(source: &str) -> Result<Rule, Vec<ParseError>> {
    let mut p = parser::Parser::new(source);
    match p.parse_single_rule() {
        Some(rule) if p.errors.is_empty() => Ok(rule),
        _ => Err(p.errors),
    }
}
