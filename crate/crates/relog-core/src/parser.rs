//! Text query language for algebra expressions.
//!
//! ```text
//! expr  := func | ident
//! func  := name "(" args ")"
//! name  := select | project | rename | prefix | product | join
//!        | union | intersect | minus | df
//! cond  := disjunction ("|") of conjunctions ("&") of comparisons,
//!          with "!" negation and parentheses
//! atom  := attribute | integer | decimal | 'string' | HH:MM | ISO-8601
//! ```
//!
//! Attribute names may carry the engine prefixes spelled `d.` / `u.`
//! (e.g. `u.activity`). Whitespace is insignificant, identifiers are
//! case-sensitive. [`render`] produces text that parses back to a
//! structurally identical tree.

use std::fmt;

use thiserror::Error;

use crate::algebra::{AlgebraExpr, Condition, Operand};
use crate::relation::{AttrName, CompareOp, Value};

/// Byte range into the query text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("parse error at {span}: expected {}, found {found}", .expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Dec(f64),
    Time(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Bang,
    Amp,
    Pipe,
    Cmp(CompareOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::Dec(v) => format!("'{v}'"),
            Tok::Time(_) => "timestamp".to_string(),
            Tok::Str(s) => format!("'{s}'"),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::Comma => "','".to_string(),
            Tok::Arrow => "'->'".to_string(),
            Tok::Bang => "'!'".to_string(),
            Tok::Amp => "'&'".to_string(),
            Tok::Pipe => "'|'".to_string(),
            Tok::Cmp(op) => format!("'{op}'"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

struct Spanned {
    tok: Tok,
    span: SourceSpan,
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, start: usize, expected: &[&str]) -> ParseError {
        let end = (start + 1).min(self.text.len());
        ParseError {
            span: SourceSpan { start, end },
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.text[start..end].to_string(),
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.peek_byte(), Some(b) if b.is_ascii_whitespace()) {
                self.pos += 1;
            }
            let start = self.pos;
            let Some(b) = self.peek_byte() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    span: SourceSpan {
                        start,
                        end: start,
                    },
                });
                return Ok(out);
            };
            let tok = match b {
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                b'!' => {
                    self.pos += 1;
                    if self.peek_byte() == Some(b'=') {
                        self.pos += 1;
                        Tok::Cmp(CompareOp::Ne)
                    } else {
                        Tok::Bang
                    }
                }
                b'&' => {
                    self.pos += 1;
                    Tok::Amp
                }
                b'|' => {
                    self.pos += 1;
                    Tok::Pipe
                }
                b'>' => {
                    self.pos += 1;
                    if self.peek_byte() == Some(b'=') {
                        self.pos += 1;
                        Tok::Cmp(CompareOp::Ge)
                    } else {
                        Tok::Cmp(CompareOp::Gt)
                    }
                }
                b'<' => {
                    self.pos += 1;
                    if self.peek_byte() == Some(b'=') {
                        self.pos += 1;
                        Tok::Cmp(CompareOp::Le)
                    } else {
                        Tok::Cmp(CompareOp::Lt)
                    }
                }
                b'=' => {
                    self.pos += 1;
                    Tok::Cmp(CompareOp::Eq)
                }
                b'-' => {
                    self.pos += 1;
                    if self.peek_byte() == Some(b'>') {
                        self.pos += 1;
                        Tok::Arrow
                    } else if matches!(self.peek_byte(), Some(d) if d.is_ascii_digit()) {
                        self.lex_number(start, true)?
                    } else {
                        return Err(self.error(start, &["'->'", "number"]));
                    }
                }
                b'\'' | b'"' => self.lex_string(start, b)?,
                d if d.is_ascii_digit() => self.lex_number(start, false)?,
                c if c.is_ascii_alphabetic() || c == b'_' => self.lex_ident(),
                _ => return Err(self.error(start, &["token"])),
            };
            let span = SourceSpan {
                start,
                end: self.pos,
            };
            out.push(Spanned { tok, span });
        }
    }

    fn lex_string(&mut self, start: usize, quote: u8) -> Result<Tok, ParseError> {
        self.pos += 1;
        let content_start = self.pos;
        while let Some(b) = self.peek_byte() {
            if b == quote {
                let s = self.text[content_start..self.pos].to_string();
                self.pos += 1;
                return Ok(Tok::Str(s));
            }
            self.pos += 1;
        }
        Err(self.error(start, &["closing quote"]))
    }

    fn lex_ident(&mut self) -> Tok {
        let start = self.pos;
        while matches!(self.peek_byte(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.pos += 1;
        }
        // dotted attribute paths: d.case, u.d.amount, ...
        while self.peek_byte() == Some(b'.')
            && matches!(self.bytes.get(self.pos + 1), Some(b) if b.is_ascii_alphabetic() || *b == b'_')
        {
            self.pos += 1;
            while matches!(self.peek_byte(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
                self.pos += 1;
            }
        }
        Tok::Ident(self.text[start..self.pos].to_string())
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek_byte(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn lex_number(&mut self, start: usize, negative: bool) -> Result<Tok, ParseError> {
        let int_part = self.digits();
        match self.peek_byte() {
            Some(b'.') if matches!(self.bytes.get(self.pos + 1), Some(d) if d.is_ascii_digit()) => {
                self.pos += 1;
                self.digits();
                let text = &self.text[start..self.pos];
                let v: f64 = text
                    .parse()
                    .map_err(|_| self.error(start, &["decimal literal"]))?;
                Ok(Tok::Dec(v))
            }
            Some(b':') if !negative && int_part.len() <= 2 => {
                self.pos += 1;
                let minutes = self.digits();
                let (h, m) = (int_part.parse::<i64>(), minutes.parse::<i64>());
                match (h, m, minutes.len()) {
                    (Ok(h), Ok(m), 2) if h < 24 && m < 60 => Ok(Tok::Time((h * 60 + m) * 60_000)),
                    _ => Err(self.error(start, &["HH:MM timestamp"])),
                }
            }
            Some(b'-') if !negative && int_part.len() == 4 => self.lex_iso_date(start, int_part),
            _ => {
                let text = &self.text[start..self.pos];
                let v: i64 = text
                    .parse()
                    .map_err(|_| self.error(start, &["integer literal"]))?;
                Ok(Tok::Int(v))
            }
        }
    }

    fn lex_iso_date(&mut self, start: usize, year: &str) -> Result<Tok, ParseError> {
        let err = |l: &Self| l.error(start, &["ISO-8601 timestamp"]);
        self.pos += 1;
        let month = self.digits().to_string();
        if self.peek_byte() != Some(b'-') {
            return Err(err(self));
        }
        self.pos += 1;
        let day = self.digits().to_string();
        let date = chrono::NaiveDate::from_ymd_opt(
            year.parse().map_err(|_| err(self))?,
            month.parse().map_err(|_| err(self))?,
            day.parse().map_err(|_| err(self))?,
        )
        .ok_or_else(|| err(self))?;

        let mut time = (0u32, 0u32, 0u32, 0u32); // h, m, s, ms
        if self.peek_byte() == Some(b'T') {
            self.pos += 1;
            time.0 = self.digits().parse().map_err(|_| err(self))?;
            if self.peek_byte() != Some(b':') {
                return Err(err(self));
            }
            self.pos += 1;
            time.1 = self.digits().parse().map_err(|_| err(self))?;
            if self.peek_byte() == Some(b':') {
                self.pos += 1;
                time.2 = self.digits().parse().map_err(|_| err(self))?;
                if self.peek_byte() == Some(b'.') {
                    self.pos += 1;
                    let frac = self.digits();
                    let scaled = format!("{frac:0<3}");
                    time.3 = scaled[..3].parse().map_err(|_| err(self))?;
                }
            }
        }
        if self.peek_byte() == Some(b'Z') {
            self.pos += 1;
        }
        let dt = date
            .and_hms_milli_opt(time.0, time.1, time.2, time.3)
            .ok_or_else(|| err(self))?;
        Ok(Tok::Time(dt.and_utc().timestamp_millis()))
    }
}

/// Parse query text into an expression tree.
pub fn parse(text: &str) -> Result<AlgebraExpr, ParseError> {
    let tokens = Lexer::new(text).tokenize()?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.expr()?;
    p.expect_eof()?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

const FUNC_NAMES: [&str; 10] = [
    "select",
    "project",
    "rename",
    "prefix",
    "product",
    "join",
    "union",
    "intersect",
    "minus",
    "df",
];

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Spanned {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx]
    }

    fn advance(&mut self) -> &Spanned {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let here = self.peek();
        ParseError {
            span: here.span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: here.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn expr(&mut self) -> Result<AlgebraExpr, ParseError> {
        let (name, is_call) = match (&self.peek().tok, &self.peek_at(1).tok) {
            (Tok::Ident(name), Tok::LParen) if FUNC_NAMES.contains(&name.as_str()) => {
                (name.clone(), true)
            }
            (Tok::Ident(name), _) => (name.clone(), false),
            _ => return Err(self.error(&["expression"])),
        };
        if !is_call {
            if name.contains('.') {
                return Err(self.error(&["relation name without prefixes"]));
            }
            self.advance();
            return Ok(AlgebraExpr::base(name));
        }
        self.advance(); // name
        self.advance(); // (
        let expr = match name.as_str() {
            "select" => {
                let condition = self.condition()?;
                self.expect(Tok::Comma, "','")?;
                AlgebraExpr::select(condition, self.expr()?)
            }
            "project" => {
                let mut attrs = vec![self.attr()?];
                self.expect(Tok::Comma, "','")?;
                // an identifier followed by a comma is another projection
                // attribute; otherwise the remainder is the input
                while let (Tok::Ident(_), Tok::Comma) = (&self.peek().tok, &self.peek_at(1).tok) {
                    attrs.push(self.attr()?);
                    self.advance(); // comma
                }
                AlgebraExpr::project(attrs, self.expr()?)
            }
            "rename" => {
                let from = self.attr()?;
                self.expect(Tok::Arrow, "'->'")?;
                let to = self.attr()?;
                self.expect(Tok::Comma, "','")?;
                AlgebraExpr::rename(from, to, self.expr()?)
            }
            "prefix" => {
                let p = match &self.peek().tok {
                    Tok::Ident(s) if !s.contains('.') => s.clone(),
                    _ => return Err(self.error(&["prefix identifier"])),
                };
                self.advance();
                self.expect(Tok::Comma, "','")?;
                AlgebraExpr::prefix(p, self.expr()?)
            }
            "product" | "union" | "intersect" | "minus" => {
                let left = self.expr()?;
                self.expect(Tok::Comma, "','")?;
                let right = self.expr()?;
                match name.as_str() {
                    "product" => AlgebraExpr::product(left, right),
                    "union" => AlgebraExpr::union(left, right),
                    "intersect" => AlgebraExpr::intersect(left, right),
                    _ => AlgebraExpr::minus(left, right),
                }
            }
            "join" => {
                let condition = self.condition()?;
                self.expect(Tok::Comma, "','")?;
                let left = self.expr()?;
                self.expect(Tok::Comma, "','")?;
                AlgebraExpr::join(condition, left, self.expr()?)
            }
            "df" => {
                let case_attr = self.attr()?;
                self.expect(Tok::Comma, "','")?;
                let time_attr = self.attr()?;
                self.expect(Tok::Comma, "','")?;
                AlgebraExpr::df(case_attr, time_attr, self.expr()?)
            }
            _ => unreachable!("guarded by FUNC_NAMES"),
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(expr)
    }

    fn attr(&mut self) -> Result<AttrName, ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let a = AttrName::new(name.clone());
                self.advance();
                Ok(a)
            }
            _ => Err(self.error(&["attribute name"])),
        }
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        let mut acc = self.conjunction()?;
        while self.peek().tok == Tok::Pipe {
            self.advance();
            acc = Condition::or(acc, self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Condition, ParseError> {
        let mut acc = self.cond_primary()?;
        while self.peek().tok == Tok::Amp {
            self.advance();
            acc = Condition::and(acc, self.cond_primary()?);
        }
        Ok(acc)
    }

    fn cond_primary(&mut self) -> Result<Condition, ParseError> {
        match &self.peek().tok {
            Tok::Bang => {
                self.advance();
                Ok(Condition::not(self.cond_primary()?))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.condition()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => {
                let lhs = self.atom()?;
                let op = match self.peek().tok {
                    Tok::Cmp(op) => op,
                    _ => return Err(self.error(&["comparison operator"])),
                };
                self.advance();
                let rhs = self.atom()?;
                Ok(Condition::compare(lhs, op, rhs))
            }
        }
    }

    fn atom(&mut self) -> Result<Operand, ParseError> {
        let operand = match &self.peek().tok {
            Tok::Ident(name) => Operand::Attr(AttrName::new(name.clone())),
            Tok::Int(v) => Operand::Const(Value::Integer(*v)),
            Tok::Dec(v) => Operand::Const(Value::decimal(*v)),
            Tok::Time(ms) => Operand::Const(Value::Timestamp(*ms)),
            Tok::Str(s) => Operand::Const(Value::text(s.clone())),
            _ => return Err(self.error(&["attribute or literal"])),
        };
        self.advance();
        Ok(operand)
    }
}

/// Render a tree back to query text; `parse(render(e))` is structurally
/// identical to `e`.
pub fn render(expr: &AlgebraExpr) -> String {
    match expr {
        AlgebraExpr::BaseRel(name) => name.clone(),
        AlgebraExpr::Select { condition, input } => {
            format!("select({condition}, {})", render(input))
        }
        AlgebraExpr::Project { attrs, input } => {
            let names: Vec<String> = attrs.iter().map(|a| a.to_string()).collect();
            format!("project({}, {})", names.join(", "), render(input))
        }
        AlgebraExpr::RenameAttr { from, to, input } => {
            format!("rename({from} -> {to}, {})", render(input))
        }
        AlgebraExpr::RenamePrefix { prefix, input } => {
            format!("prefix({prefix}, {})", render(input))
        }
        AlgebraExpr::Product { left, right } => {
            format!("product({}, {})", render(left), render(right))
        }
        AlgebraExpr::Join {
            condition,
            left,
            right,
        } => format!("join({condition}, {}, {})", render(left), render(right)),
        AlgebraExpr::Union { left, right } => {
            format!("union({}, {})", render(left), render(right))
        }
        AlgebraExpr::Intersect { left, right } => {
            format!("intersect({}, {})", render(left), render(right))
        }
        AlgebraExpr::Minus { left, right } => {
            format!("minus({}, {})", render(left), render(right))
        }
        AlgebraExpr::DirectlyFollows {
            case_attr,
            time_attr,
            input,
        } => format!("df({case_attr}, {time_attr}, {})", render(input)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Condition;
    use crate::relation::CompareOp;

    fn roundtrip(text: &str) -> AlgebraExpr {
        let e = parse(text).unwrap();
        let rendered = render(&e);
        let again = parse(&rendered).unwrap();
        assert_eq!(e, again, "round-trip mismatch for {text} -> {rendered}");
        e
    }

    #[test]
    fn parses_simple_select() {
        let e = parse("select(case = 1, Log)").unwrap();
        assert_eq!(
            e,
            AlgebraExpr::select(
                Condition::attr_op_value("case", CompareOp::Eq, Value::Integer(1)),
                AlgebraExpr::base("Log")
            )
        );
    }

    #[test]
    fn parses_prefixed_attributes() {
        let e = roundtrip("project(u.activity, select(u.amount != d.amount, df(case, end_time, Log)))");
        let AlgebraExpr::Project { attrs, .. } = &e else {
            panic!("expected projection");
        };
        assert_eq!(attrs, &vec![AttrName::new("u.activity")]);
    }

    #[test]
    fn parses_nested_df() {
        let e = roundtrip("df(u.case, u.end_time, df(case, end_time, Log))");
        let AlgebraExpr::DirectlyFollows { input, .. } = &e else {
            panic!("expected df");
        };
        assert!(matches!(**input, AlgebraExpr::DirectlyFollows { .. }));
    }

    #[test]
    fn parses_timestamp_literals() {
        let e = parse("select(end_time < 02:32, Log)").unwrap();
        let AlgebraExpr::Select { condition, .. } = &e else {
            panic!();
        };
        assert_eq!(
            *condition,
            Condition::attr_op_value(
                "end_time",
                CompareOp::Lt,
                Value::Timestamp((2 * 60 + 32) * 60_000)
            )
        );
        roundtrip("select(end_time < 02:32, Log)");
        roundtrip("select(end_time >= 2024-01-15T08:30:00Z, Log)");
    }

    #[test]
    fn parses_condition_precedence() {
        let e = parse("select(a = 1 & b = 2 | !c < 3, R)").unwrap();
        let AlgebraExpr::Select { condition, .. } = &e else {
            panic!();
        };
        assert!(matches!(condition, Condition::Or(..)));
        roundtrip("select(a = 1 & (b = 2 | !c < 3), R)");
    }

    #[test]
    fn multi_attr_projection() {
        let e = roundtrip("project(case, activity, Log)");
        let AlgebraExpr::Project { attrs, .. } = &e else {
            panic!();
        };
        assert_eq!(attrs.len(), 2);
    }

    #[test]
    fn keyword_without_call_is_a_relation() {
        assert_eq!(parse("df").unwrap(), AlgebraExpr::base("df"));
    }

    #[test]
    fn error_spans_point_into_input() {
        let text = "select(case = , Log)";
        let err = parse(text).unwrap_err();
        assert!(err.span.start <= err.span.end);
        assert!(err.span.end <= text.len());
        assert!(!err.expected.is_empty());
    }

    #[test]
    fn error_on_trailing_input() {
        let err = parse("Log extra").unwrap_err();
        assert_eq!(err.expected, vec!["end of input".to_string()]);
    }

    #[test]
    fn rename_roundtrip() {
        let e = roundtrip("rename(case -> id, Log)");
        assert_eq!(
            e,
            AlgebraExpr::rename("case", "id", AlgebraExpr::base("Log"))
        );
    }

    #[test]
    fn string_literals_both_quote_styles() {
        roundtrip("select(activity = 'A', Log)");
        let e = parse("select(activity = \"it's\", Log)").unwrap();
        let AlgebraExpr::Select { condition, .. } = &e else {
            panic!();
        };
        assert_eq!(
            *condition,
            Condition::attr_op_value("activity", CompareOp::Eq, Value::text("it's"))
        );
    }

    #[test]
    fn negative_literals() {
        roundtrip("select(delta >= -12, R)");
        roundtrip("select(delta >= -12.5, R)");
    }
}
