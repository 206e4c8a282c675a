use super::SourceSpan;
use crate::kb::CmpOp;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    Comma,
    Colon,
    Define,
    Op(CmpOp),
    /// A lexical error; the parser reports the message when it reaches it.
    Invalid(String),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(_) => "string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Define => "`:=`".into(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::Invalid(_) => "invalid input".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    /// First token on its line.
    pub line_start: bool,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

pub(crate) fn tokenize(source: &str) -> Vec<Token> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out: Vec<Token> = Vec::new();
    let mut last_tok_line = 0;
    // line and length of the last line holding any character other than the
    // final newline, for the end-of-input sentinel
    let mut eof_line = 1;
    let mut eof_col = 1;

    while let Some(c) = cur.peek() {
        if c != '\n' {
            eof_line = cur.line;
        }
        if c == '\n' || c.is_whitespace() {
            cur.bump();
            if c != '\n' {
                eof_col = cur.column;
            }
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            eof_col = cur.column;
            continue;
        }
        let (line, column) = (cur.line, cur.column);
        let tok = lex_one(&mut cur);
        eof_col = cur.column;
        let length = if cur.line == line {
            (cur.column - column).max(1)
        } else {
            1
        };
        out.push(Token {
            tok,
            span: SourceSpan {
                line,
                column,
                length,
            },
            line_start: line != last_tok_line,
        });
        last_tok_line = line;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan {
            line: eof_line,
            column: eof_col,
            length: 1,
        },
        line_start: true,
    });
    out
}

fn lex_one(cur: &mut Cursor<'_>) -> Tok {
    let c = cur.bump().expect("caller peeked a character");
    match c {
        '{' => Tok::LBrace,
        '}' => Tok::RBrace,
        ',' => Tok::Comma,
        ':' => {
            if cur.peek() == Some('=') {
                cur.bump();
                Tok::Define
            } else {
                Tok::Colon
            }
        }
        '=' => Tok::Op(CmpOp::Eq),
        '!' => {
            if cur.peek() == Some('=') {
                cur.bump();
                Tok::Op(CmpOp::Ne)
            } else {
                Tok::Invalid("unexpected character `!`".into())
            }
        }
        '<' | '>' => {
            let or_equal = cur.peek() == Some('=');
            if or_equal {
                cur.bump();
            }
            Tok::Op(match (c, or_equal) {
                ('<', false) => CmpOp::Lt,
                ('<', true) => CmpOp::Le,
                ('>', false) => CmpOp::Gt,
                _ => CmpOp::Ge,
            })
        }
        '"' => lex_string(cur),
        '-' | '0'..='9' => lex_number(cur, c),
        c if c.is_ascii_alphabetic() => {
            let mut word = String::from(c);
            while let Some(n) = cur.peek() {
                if n.is_ascii_alphanumeric() || n == '_' {
                    word.push(n);
                    cur.bump();
                } else {
                    break;
                }
            }
            Tok::Word(word)
        }
        other => Tok::Invalid(format!("unexpected character `{}`", other.escape_debug())),
    }
}

fn lex_string(cur: &mut Cursor<'_>) -> Tok {
    let mut s = String::new();
    let mut bad_escape = None;
    loop {
        match cur.peek() {
            None | Some('\n') => return Tok::Invalid("unterminated string".into()),
            Some('"') => {
                cur.bump();
                break;
            }
            Some('\\') => {
                cur.bump();
                match cur.peek() {
                    None | Some('\n') => return Tok::Invalid("unterminated string".into()),
                    Some(e) => {
                        cur.bump();
                        match unescape_char(e) {
                            Some(u) => s.push(u),
                            None => {
                                bad_escape.get_or_insert(e);
                            }
                        }
                    }
                }
            }
            Some(c) => {
                cur.bump();
                s.push(c);
            }
        }
    }
    match bad_escape {
        Some(e) => Tok::Invalid(format!("unknown escape `\\{}` in string", e.escape_debug())),
        None => Tok::Str(s),
    }
}

fn lex_number(cur: &mut Cursor<'_>, first: char) -> Tok {
    let mut text = String::from(first);
    while let Some(c) = cur.peek() {
        if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '+' | '-') {
            // an exponent sign only follows `e`/`E`
            if matches!(c, '+' | '-') && !text.ends_with(['e', 'E']) {
                break;
            }
            text.push(c);
            cur.bump();
        } else {
            break;
        }
    }
    match parse_number(&text) {
        Some(n) => Tok::Number(n),
        None => Tok::Invalid(format!("malformed number `{text}`")),
    }
}

fn unescape_char(e: char) -> Option<char> {
    Some(match e {
        '\\' => '\\',
        '"' => '"',
        'n' => '\n',
        't' => '\t',
        'r' => '\r',
        _ => return None,
    })
}

/// Number literal: `-?[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?`, finite.
pub fn parse_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if bytes.first() == Some(&b'-') {
        i += 1;
    }
    if !digits(&mut i) {
        return None;
    }
    if bytes.get(i) == Some(&b'.') {
        i += 1;
        if !digits(&mut i) {
            return None;
        }
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(bytes.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        if !digits(&mut i) {
            return None;
        }
    }
    if i != bytes.len() {
        return None;
    }
    text.parse::<f64>().ok().filter(|n| n.is_finite())
}

pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_string`] for the body of a string literal.
pub fn unescape_string(body: &str) -> Option<String> {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(unescape_char(chars.next()?)?),
            '"' | '\n' => return None,
            c => out.push(c),
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_punctuation() {
        assert_eq!(
            kinds("a := b != c <= d >= e < f > g = h, {}:"),
            vec![
                Tok::Word("a".into()),
                Tok::Define,
                Tok::Word("b".into()),
                Tok::Op(CmpOp::Ne),
                Tok::Word("c".into()),
                Tok::Op(CmpOp::Le),
                Tok::Word("d".into()),
                Tok::Op(CmpOp::Ge),
                Tok::Word("e".into()),
                Tok::Op(CmpOp::Lt),
                Tok::Word("f".into()),
                Tok::Op(CmpOp::Gt),
                Tok::Word("g".into()),
                Tok::Op(CmpOp::Eq),
                Tok::Word("h".into()),
                Tok::Comma,
                Tok::LBrace,
                Tok::RBrace,
                Tok::Colon,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("-12.5e-1"), Some(-1.25));
        assert_eq!(parse_number("1e999"), None);
        assert_eq!(parse_number("1."), None);
        assert_eq!(parse_number(".5"), None);
        assert_eq!(parse_number("0x10"), None);
        assert!(matches!(kinds("12abc")[0], Tok::Invalid(_)));
        assert_eq!(kinds("x>-3")[2], Tok::Number(-3.0));
    }

    #[test]
    fn strings_and_comments() {
        assert_eq!(
            kinds("\"a\\\"b\\n\" # trailing \"comment\"\n"),
            vec![Tok::Str("a\"b\n".into()), Tok::Eof]
        );
        assert!(matches!(&kinds("\"open\nx")[0], Tok::Invalid(m) if m.contains("unterminated")));
        assert!(matches!(&kinds("\"\\q\"")[0], Tok::Invalid(m) if m.contains("escape")));
    }

    #[test]
    fn spans_are_char_based() {
        let toks = tokenize("é = \"ü\"\n  rule");
        // `é` is not an identifier character
        assert!(matches!(toks[0].tok, Tok::Invalid(_)));
        assert_eq!(
            toks[2].span,
            SourceSpan {
                line: 1,
                column: 5,
                length: 3
            }
        );
        assert_eq!(
            toks[3].span,
            SourceSpan {
                line: 2,
                column: 3,
                length: 4
            }
        );
        assert!(toks[3].line_start);
        assert_eq!(
            toks[4].span,
            SourceSpan {
                line: 2,
                column: 7,
                length: 1
            }
        );
    }

    #[test]
    fn eof_after_trailing_newline_stays_on_last_line() {
        let toks = tokenize("abc\n");
        assert_eq!(
            toks[1].span,
            SourceSpan {
                line: 1,
                column: 4,
                length: 1
            }
        );
    }

    #[test]
    fn escape_round_trip() {
        let s = "tab\tquote\"slash\\cr\r\nend";
        assert_eq!(unescape_string(&escape_string(s)).as_deref(), Some(s));
    }
}
