use super::lexer::{tokenize, Tok, Token};
use super::{ErrorSite, ParseError, SourceMap, SourceSpan};
use crate::kb::{
    Assignment, Condition, KnowledgeBase, MetaRule, Rule, RuleBase, Test, Value, ValueKind,
    VariableDecl,
};

pub(crate) const KEYWORDS: &[&str] = &[
    "rulebase",
    "meta",
    "global",
    "var",
    "rule",
    "if",
    "then",
    "and",
    "recommend",
    "in",
    "when",
    "use",
    "ask",
    "bool",
    "number",
    "text",
    "symbol",
    "true",
    "false",
];

/// Failure already recorded in the parser's error list.
struct Reported;

type PResult<T> = Result<T, Reported>;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub errors: Vec<ParseError>,
    pub spans: SourceMap,
}

impl Parser {
    pub(crate) fn new(source: &str) -> Self {
        Parser {
            toks: tokenize(source),
            pos: 0,
            errors: Vec::new(),
            spans: SourceMap::default(),
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == word)
    }

    fn fail<T>(&mut self, expected: &[&str]) -> PResult<T> {
        let tok = self.peek().clone();
        let message = match &tok.tok {
            Tok::Invalid(msg) => msg.clone(),
            found => format!(
                "expected {}, found {}",
                expected.join(" or "),
                found.describe()
            ),
        };
        self.errors.push(ParseError {
            message,
            site: ErrorSite::Span(tok.span),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
        Err(Reported)
    }

    fn expect_word(&mut self, word: &'static str) -> PResult<SourceSpan> {
        if self.at_word(word) {
            Ok(self.advance().span)
        } else {
            self.fail(&[&format!("`{word}`")])
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if self.peek().tok == tok {
            Ok(self.advance().span)
        } else {
            self.fail(&[&tok.describe()])
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        if let Tok::Word(w) = &self.peek().tok {
            if !KEYWORDS.contains(&w.as_str()) {
                let w = w.clone();
                let span = self.advance().span;
                return Ok((w, span));
            }
        }
        self.fail(&["identifier"])
    }

    fn string(&mut self) -> PResult<String> {
        if let Tok::Str(s) = &self.peek().tok {
            let s = s.clone();
            self.advance();
            return Ok(s);
        }
        self.fail(&["string"])
    }

    fn value(&mut self) -> PResult<Value> {
        let v = match &self.peek().tok {
            Tok::Word(w) if w == "true" => Value::Bool(true),
            Tok::Word(w) if w == "false" => Value::Bool(false),
            Tok::Word(w) if !KEYWORDS.contains(&w.as_str()) => Value::Symbol(w.clone()),
            Tok::Number(n) => Value::Number(*n),
            Tok::Str(s) => Value::Text(s.clone()),
            _ => return self.fail(&["value"]),
        };
        self.advance();
        Ok(v)
    }

    /// Skips to the next line-initial token that can start an item or close a
    /// block. Always consumes at least one token.
    fn recover(&mut self, stops: &[&str]) {
        if !self.at_eof() {
            self.advance();
        }
        while !self.at_eof() {
            let t = self.peek();
            if t.line_start {
                match &t.tok {
                    Tok::RBrace => return,
                    Tok::Word(w) if stops.contains(&w.as_str()) => return,
                    _ => {}
                }
            }
            self.advance();
        }
    }

    pub(crate) fn parse_kb(&mut self) -> KnowledgeBase {
        const TOP: &[&str] = &["rulebase", "meta", "global", "rule", "var", "when"];
        let mut kb = KnowledgeBase::default();
        while !self.at_eof() {
            let ok = if self.at_word("rulebase") {
                self.rulebase(&mut kb)
            } else if self.at_word("meta") {
                self.meta_block(&mut kb)
            } else if self.at_word("global") {
                self.global_block(&mut kb)
            } else if self.at_word("rule") || self.at_word("var") || self.at_word("when") {
                self.stray_item()
            } else {
                self.fail(&["`rulebase`", "`meta`", "`global`"])
            };
            if ok.is_err() {
                self.recover(TOP);
                // a stray closing brace cannot start anything
                if self.peek().tok == Tok::RBrace {
                    self.advance();
                }
            }
        }
        kb
    }

    /// An item outside of any block. Parsed so that its own syntax errors are
    /// reported precisely; a well-formed one is still misplaced.
    fn stray_item(&mut self) -> PResult<()> {
        let start = self.peek().clone();
        let mut scratch = RuleBase::new("_");
        let mut kb = KnowledgeBase::default();
        let keyword = match &start.tok {
            Tok::Word(w) => w.clone(),
            _ => unreachable!("caller checked for an item keyword"),
        };
        match keyword.as_str() {
            "rule" => self.rule(&mut scratch, usize::MAX)?,
            "var" => {
                self.declaration()?;
            }
            _ => {
                self.meta_rule(&mut kb)?;
                self.spans.meta_rules.pop();
            }
        }
        let block = if keyword == "when" {
            "a meta"
        } else {
            "a rulebase or global"
        };
        self.errors.push(ParseError {
            message: format!("`{keyword}` must appear inside {block} block"),
            site: ErrorSite::Span(start.span),
            expected: vec!["`rulebase`".into(), "`meta`".into(), "`global`".into()],
        });
        Ok(())
    }

    fn rulebase(&mut self, kb: &mut KnowledgeBase) -> PResult<()> {
        self.expect_word("rulebase")?;
        let (id, span) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let rb_index = kb.rulebases.len();
        self.spans.rulebases.push(span);
        self.spans.rules.push(Vec::new());
        self.spans.declarations.push(Vec::new());
        let mut rb = RuleBase::new(id);
        let result = self.block_items(
            |p| {
                if p.at_word("var") {
                    let span = p.peek().span;
                    let decl = p.declaration()?;
                    p.spans.declarations[rb_index].push((decl.name.clone(), span));
                    rb.declarations.push(decl);
                    Ok(())
                } else if p.at_word("rule") {
                    p.rule(&mut rb, rb_index)
                } else {
                    p.fail(&["`var`", "`rule`", "`}`"])
                }
            },
            &["var", "rule"],
        );
        kb.rulebases.push(rb);
        result
    }

    fn meta_block(&mut self, kb: &mut KnowledgeBase) -> PResult<()> {
        self.expect_word("meta")?;
        self.expect(Tok::LBrace)?;
        self.block_items(
            |p| {
                if p.at_word("when") {
                    p.meta_rule(kb)
                } else {
                    p.fail(&["`when`", "`}`"])
                }
            },
            &["when"],
        )
    }

    fn global_block(&mut self, kb: &mut KnowledgeBase) -> PResult<()> {
        self.expect_word("global")?;
        self.expect(Tok::LBrace)?;
        self.block_items(
            |p| {
                if p.at_word("var") {
                    let span = p.peek().span;
                    let decl = p.declaration()?;
                    p.spans.global_declarations.push((decl.name.clone(), span));
                    kb.global_declarations.push(decl);
                    Ok(())
                } else {
                    p.fail(&["`var`", "`}`"])
                }
            },
            &["var"],
        )
    }

    /// Items up to the closing brace, recovering at item boundaries.
    fn block_items(
        &mut self,
        mut item: impl FnMut(&mut Self) -> PResult<()>,
        stops: &[&str],
    ) -> PResult<()> {
        const OUTER: &[&str] = &["rulebase", "meta", "global"];
        let mut all: Vec<&str> = stops.to_vec();
        all.extend_from_slice(OUTER);
        loop {
            match &self.peek().tok {
                Tok::RBrace => {
                    self.advance();
                    return Ok(());
                }
                Tok::Eof => return self.fail(&["`}`"]),
                Tok::Word(w) if self.peek().line_start && OUTER.contains(&w.as_str()) => {
                    // unclosed block; report and let the caller continue here
                    self.fail::<()>(&["`}`"]).ok();
                    return Ok(());
                }
                _ => {}
            }
            if item(self).is_err() {
                self.recover(&all);
            }
        }
    }

    fn declaration(&mut self) -> PResult<VariableDecl> {
        self.expect_word("var")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let kind = match &self.peek().tok {
            Tok::Word(w) => ValueKind::from_keyword(w),
            _ => None,
        };
        let Some(kind) = kind else {
            return self.fail(&["`bool`", "`number`", "`text`", "`symbol`"]);
        };
        self.advance();
        let mut decl = VariableDecl::new(name, kind);
        if self.peek().tok == Tok::LBrace {
            self.advance();
            let mut set = vec![self.ident()?.0];
            while self.peek().tok == Tok::Comma {
                self.advance();
                set.push(self.ident()?.0);
            }
            self.expect(Tok::RBrace)?;
            decl.symbol_set = Some(set);
        }
        if self.at_word("ask") {
            self.advance();
            decl.askable = true;
            decl.prompt = Some(self.string()?);
        }
        self.end_of_item()?;
        Ok(decl)
    }

    /// Items are line-oriented: the next token must start a new line or
    /// close the block.
    fn end_of_item(&mut self) -> PResult<()> {
        let t = self.peek();
        if t.line_start || matches!(t.tok, Tok::Eof | Tok::RBrace) {
            Ok(())
        } else {
            self.fail(&["end of line"])
        }
    }

    fn rule(&mut self, rb: &mut RuleBase, rb_index: usize) -> PResult<()> {
        let rule_span = self.expect_word("rule")?;
        let (id, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        self.expect_word("if")?;
        let mut antecedents = Vec::new();
        let mut ante_spans = Vec::new();
        loop {
            ante_spans.push(self.peek().span);
            antecedents.push(self.condition()?);
            if self.at_word("and") {
                self.advance();
            } else {
                break;
            }
        }
        self.expect_word("then")?;
        let mut consequents = Vec::new();
        let mut cons_spans = Vec::new();
        loop {
            cons_spans.push(self.peek().span);
            let (variable, _) = self.ident()?;
            self.expect(Tok::Define)?;
            consequents.push(Assignment {
                variable,
                value: self.value()?,
            });
            if self.at_word("and") {
                self.advance();
            } else {
                break;
            }
        }
        let recommendation = if self.at_word("recommend") {
            self.advance();
            Some(self.string()?)
        } else {
            None
        };
        self.end_of_item()?;
        if let Some(spans) = self.spans.rules.get_mut(rb_index) {
            spans.push(super::RuleSpans {
                rule: rule_span,
                antecedents: ante_spans,
                consequents: cons_spans,
            });
        }
        let order_index = rb.rules.len();
        rb.rules.push(Rule {
            id,
            order_index,
            antecedents,
            consequents,
            recommendation,
        });
        Ok(())
    }

    fn condition(&mut self) -> PResult<Condition> {
        let (variable, _) = self.ident()?;
        if self.at_word("in") {
            self.advance();
            self.expect(Tok::LBrace)?;
            let mut values = vec![self.value()?];
            while self.peek().tok == Tok::Comma {
                self.advance();
                values.push(self.value()?);
            }
            self.expect(Tok::RBrace)?;
            return Ok(Condition {
                variable,
                test: Test::In(values),
            });
        }
        let op = match self.peek().tok {
            Tok::Op(op) => op,
            _ => return self.fail(&["operator", "`in`"]),
        };
        self.advance();
        let value = self.value()?;
        Ok(Condition::compare(variable, op, value))
    }

    fn meta_rule(&mut self, kb: &mut KnowledgeBase) -> PResult<()> {
        let span = self.expect_word("when")?;
        let mut antecedents = vec![self.condition()?];
        while self.at_word("and") {
            self.advance();
            antecedents.push(self.condition()?);
        }
        self.expect_word("use")?;
        let (target_rulebase, _) = self.ident()?;
        self.end_of_item()?;
        self.spans.meta_rules.push(span);
        kb.meta_rules.push(MetaRule {
            antecedents,
            target_rulebase,
        });
        Ok(())
    }

    /// A single `rule ...` item and nothing else.
    pub(crate) fn parse_single_rule(&mut self) -> Option<Rule> {
        let mut rb = RuleBase::new("_");
        self.spans.rules.push(Vec::new());
        if self.rule(&mut rb, 0).is_err() {
            return None;
        }
        if !self.at_eof() {
            self.fail::<()>(&["end of input"]).ok();
            return None;
        }
        rb.rules.pop()
    }
}
