//! Whitelist validator for the SELECT statements that may touch the replay
//! table, plus an evaluator for their WHERE predicate.
//!
//! Accepted grammar (keywords case-insensitive):
//!
//! ```text
//! stmt    := SELECT proj FROM replay [WHERE expr] [;]
//! proj    := '*' | column (',' column)*
//! expr    := and (OR and)*
//! and     := unary (AND unary)*
//! unary   := NOT unary | '(' expr ')' | TRUE | FALSE | operand cmp operand
//! operand := column | ['-'|'+'] number
//! cmp     := = | == | != | <> | < | <= | > | >=
//! ```
//!
//! Everything else (comments, strings, joins, subqueries, functions, a second
//! statement) is rejected.

use std::fmt;

use crate::error::{Error, Result};
use crate::replay::{FeatureSchema, ReplayRecord, TABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Episode,
    Step,
    Action,
    Reward,
    Done,
    Truncated,
    Feature(usize),
}

impl Column {
    fn value(self, r: &ReplayRecord) -> f64 {
        match self {
            Column::Episode => r.episode as f64,
            Column::Step => r.step as f64,
            Column::Action => r.action as f64,
            Column::Reward => r.reward,
            Column::Done => r.done as u8 as f64,
            Column::Truncated => r.truncated as u8 as f64,
            Column::Feature(i) => r.state[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operand {
    Column(Column),
    Number(f64),
}

impl Operand {
    fn value(self, r: &ReplayRecord) -> f64 {
        match self {
            Operand::Column(c) => c.value(r),
            Operand::Number(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bool(bool),
    Cmp(Operand, CmpOp, Operand),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, r: &ReplayRecord) -> bool {
        match self {
            Expr::Bool(b) => *b,
            Expr::Cmp(a, op, b) => op.apply(a.value(r), b.value(r)),
            Expr::Not(e) => !e.eval(r),
            Expr::And(a, b) => a.eval(r) && b.eval(r),
            Expr::Or(a, b) => a.eval(r) || b.eval(r),
        }
    }
}

/// A statement that passed [`validate_sql`]. Only obtainable through it.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSelect {
    sql: String,
    predicate: Expr,
}

impl ValidatedSelect {
    pub fn sql(&self) -> &str {
        &self.sql
    }

    pub fn predicate(&self) -> &Expr {
        &self.predicate
    }

    pub fn matches(&self, r: &ReplayRecord) -> bool {
        self.predicate.eval(r)
    }
}

impl fmt::Display for ValidatedSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.sql)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Star,
    Comma,
    LParen,
    RParen,
    Semi,
    Minus,
    Plus,
    Cmp(CmpOp),
}

fn reject(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(s[start..i].to_string())));
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(reject(format!("malformed number at position {start}")));
            }
            let v: f64 = s[start..i]
                .parse()
                .map_err(|_| reject(format!("malformed number at position {start}")))?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        let two = s.get(i..i + 2).unwrap_or("");
        let (tok, len) = match two {
            "--" | "/*" => return Err(reject("comments are not allowed")),
            "<=" => (Tok::Cmp(CmpOp::Le), 2),
            ">=" => (Tok::Cmp(CmpOp::Ge), 2),
            "<>" | "!=" => (Tok::Cmp(CmpOp::Ne), 2),
            "==" => (Tok::Cmp(CmpOp::Eq), 2),
            _ => match c {
                b'*' => (Tok::Star, 1),
                b',' => (Tok::Comma, 1),
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b';' => (Tok::Semi, 1),
                b'-' => (Tok::Minus, 1),
                b'+' => (Tok::Plus, 1),
                b'=' => (Tok::Cmp(CmpOp::Eq), 1),
                b'<' => (Tok::Cmp(CmpOp::Lt), 1),
                b'>' => (Tok::Cmp(CmpOp::Gt), 1),
                _ => {
                    let ch = s[i..].chars().next().unwrap_or('?');
                    return Err(reject(format!("unexpected character '{ch}' at position {i}")));
                }
            },
        };
        out.push((start, tok));
        i += len;
    }
    Ok(out)
}

const KEYWORDS: [&str; 8] = ["select", "from", "where", "and", "or", "not", "true", "false"];

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    schema: &'a FeatureSchema,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(reject(format!("expected {} {}", kw.to_uppercase(), self.here())))
        }
    }

    fn here(&self) -> String {
        match self.toks.get(self.pos) {
            Some((p, t)) => format!("at position {p} (found {t:?})"),
            None => "at end of statement".to_string(),
        }
    }

    fn column(&self, name: &str) -> Result<Column> {
        let col = match name.to_ascii_lowercase().as_str() {
            "episode" => Column::Episode,
            "step" => Column::Step,
            "action" => Column::Action,
            "reward" => Column::Reward,
            "done" => Column::Done,
            "truncated" => Column::Truncated,
            _ => match self.schema.resolve_column(name) {
                Some(i) => Column::Feature(i),
                None => return Err(reject(format!("unknown column '{name}'"))),
            },
        };
        Ok(col)
    }

    fn statement(&mut self) -> Result<Expr> {
        if !self.at_keyword("select") {
            return Err(reject("only SELECT statements are allowed"));
        }
        self.pos += 1;
        if self.peek() == Some(&Tok::Star) {
            self.pos += 1;
        } else {
            loop {
                match self.next() {
                    Some(Tok::Ident(name)) if !KEYWORDS.contains(&name.to_ascii_lowercase().as_str()) => {
                        self.column(&name)?;
                    }
                    _ => return Err(reject("projection must be '*' or a list of columns")),
                }
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect_keyword("from")?;
        match self.next() {
            Some(Tok::Ident(t)) if t.eq_ignore_ascii_case(TABLE) => {}
            Some(Tok::Ident(t)) => return Err(reject(format!("unknown table '{t}'"))),
            _ => return Err(reject("expected a table name after FROM")),
        }
        let predicate = if self.at_keyword("where") {
            self.pos += 1;
            self.or_expr()?
        } else {
            Expr::Bool(true)
        };
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
        if self.pos < self.toks.len() {
            return Err(if self.toks[..self.pos].iter().any(|(_, t)| *t == Tok::Semi) {
                reject("multiple statements are not allowed")
            } else {
                reject(format!("unexpected trailing input {}", self.here()))
            });
        }
        Ok(predicate)
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.at_keyword("and") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.at_keyword("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.at_keyword("true") || self.at_keyword("false") {
            let v = self.at_keyword("true");
            self.pos += 1;
            return Ok(Expr::Bool(v));
        }
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let e = self.or_expr()?;
            if self.next() != Some(Tok::RParen) {
                return Err(reject("unbalanced parenthesis"));
            }
            return Ok(e);
        }
        let lhs = self.operand()?;
        let op = match self.next() {
            Some(Tok::Cmp(op)) => op,
            _ => return Err(reject(format!("expected comparison operator {}", self.here()))),
        };
        let rhs = self.operand()?;
        Ok(Expr::Cmp(lhs, op, rhs))
    }

    fn operand(&mut self) -> Result<Operand> {
        let sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 0.0,
        };
        match self.next() {
            Some(Tok::Num(v)) => Ok(Operand::Number(if sign < 0.0 { -v } else { v })),
            Some(Tok::Ident(name)) if sign == 0.0 => {
                if KEYWORDS.contains(&name.to_ascii_lowercase().as_str()) {
                    return Err(reject(format!("unexpected keyword '{name}'")));
                }
                if self.peek() == Some(&Tok::LParen) {
                    return Err(reject("function calls are not allowed"));
                }
                Ok(Operand::Column(self.column(&name)?))
            }
            _ => Err(reject(format!("expected a column or number {}", self.here()))),
        }
    }
}

/// Accepts exactly one SELECT over the replay table with comparison/boolean
/// predicates on known columns. Feature columns may be written either as
/// `f_<name>` (the database column) or as the bare feature name.
pub fn validate_sql(stmt: &str, schema: &FeatureSchema) -> Result<ValidatedSelect> {
    let toks = tokenize(stmt)?;
    if toks.is_empty() {
        return Err(reject("empty statement"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        schema,
    };
    let predicate = p.statement()?;
    Ok(ValidatedSelect {
        sql: stmt.trim().to_string(),
        predicate,
    })
}
