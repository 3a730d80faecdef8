//! Question parsing. A small structured grammar is always available; an
//! optional client can ask an external chat model for SQL, and whatever it
//! returns goes through the same validator.
//!
//! ```text
//! query  := WHEN ACTION '=' name [AND clause ...]
//!         | WHEN WILL YOU DO name ['?']
//!         | WHAT IF clause (AND clause)* ['?']
//! clause := feature cmp number | feature IS label
//! cmp    := < | <= | ≤ | > | >= | ≥ | = | ==
//! ```

pub mod llm;
mod sql;

use std::fmt;

pub use sql::{validate_sql, CmpOp, Column, Expr, Operand, ValidatedSelect};

use crate::error::{Error, Result};
use crate::predicates::{Level, PredicateSchema};
use crate::replay::FeatureSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    WhenAction,
    WhatIf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    IsLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClauseValue {
    Number(f64),
    /// A resolved level with the raw-value band it covers: `lower < v <= upper`.
    Level {
        level: Level,
        lower: Option<f64>,
        upper: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub feature: usize,
    pub cmp: Comparator,
    pub value: ClauseValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub kind: QueryKind,
    pub action: Option<usize>,
    pub predicates: Vec<Clause>,
}

/// Names a query may refer to.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub features: &'a FeatureSchema,
    pub actions: &'a [String],
    pub predicates: Option<&'a PredicateSchema>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Op(Comparator),
    Question,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|&(_, c)| c);
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
            out.push((pos, Tok::Word(word)));
        } else if c.is_ascii_digit()
            || c == '.'
            || ((c == '-' || c == '+') && next.is_some_and(|n| n.is_ascii_digit() || n == '.'))
        {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                let prev = chars[i - 1].1;
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || ((d == '-' || d == '+') && (prev == 'e' || prev == 'E')) {
                    i += 1;
                } else {
                    break;
                }
            }
            let lit: String = chars[start..i].iter().map(|&(_, c)| c).collect();
            let v: f64 = lit.parse().map_err(|_| Error::QuerySyntax {
                pos,
                msg: format!("malformed number '{lit}'"),
            })?;
            out.push((pos, Tok::Num(v)));
        } else {
            let (op, width) = match (c, next) {
                ('<', Some('=')) => (Comparator::Le, 2),
                ('>', Some('=')) => (Comparator::Ge, 2),
                ('=', Some('=')) => (Comparator::Eq, 2),
                ('<', _) => (Comparator::Lt, 1),
                ('>', _) => (Comparator::Gt, 1),
                ('=', _) => (Comparator::Eq, 1),
                ('≤', _) => (Comparator::Le, 1),
                ('≥', _) => (Comparator::Ge, 1),
                ('?', _) => {
                    out.push((pos, Tok::Question));
                    i += 1;
                    continue;
                }
                _ => {
                    return Err(Error::QuerySyntax {
                        pos,
                        msg: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push((pos, Tok::Op(op)));
            i += width;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    ctx: QueryContext<'a>,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::QuerySyntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.peek_kw(kw) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}'")))
        }
    }

    fn word(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn action(&mut self) -> Result<usize> {
        let actions = self.ctx.actions;
        if let Some(Tok::Num(v)) = self.peek() {
            let v = *v;
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < actions.len() {
                self.at += 1;
                return Ok(v as usize);
            }
        }
        let name = match self.peek() {
            Some(Tok::Num(v)) => format!("{v}"),
            _ => self.word("an action name")?,
        };
        actions
            .iter()
            .position(|a| a.eq_ignore_ascii_case(&name))
            .ok_or_else(|| Error::Resolution {
                kind: "action",
                name,
                valid: actions.to_vec(),
            })
    }

    fn clause(&mut self) -> Result<Clause> {
        let name = self.word("a feature name")?;
        let feature = self.ctx.features.resolve_column(&name).ok_or_else(|| Error::Resolution {
            kind: "feature",
            name: name.clone(),
            valid: self.ctx.features.names().iter().map(|s| s.to_string()).collect(),
        })?;
        if self.peek_kw("is") {
            self.at += 1;
            let mut words = Vec::new();
            while let Some(Tok::Word(w)) = self.peek() {
                if w.eq_ignore_ascii_case("and") {
                    break;
                }
                words.push(w.clone());
                self.at += 1;
            }
            if words.is_empty() {
                return Err(self.err("expected a level label"));
            }
            let label = words.join(" ");
            let preds = self.ctx.predicates.ok_or_else(|| {
                Error::InvalidArgument(format!("'{name} is {label}' needs a predicate schema"))
            })?;
            let level = preds.level_of(feature, &label).ok_or_else(|| Error::Resolution {
                kind: "level",
                name: label,
                valid: preds.features()[feature].labels.clone(),
            })?;
            let t = preds.thresholds(feature);
            let l = level as usize;
            return Ok(Clause {
                feature,
                cmp: Comparator::IsLevel,
                value: ClauseValue::Level {
                    level,
                    lower: l.checked_sub(1).map(|i| t[i]),
                    upper: t.get(l).copied(),
                },
            });
        }
        let cmp = match self.peek() {
            Some(Tok::Op(op)) => *op,
            _ => return Err(self.err("expected a comparator or 'is'")),
        };
        self.at += 1;
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.at += 1;
                Ok(Clause {
                    feature,
                    cmp,
                    value: ClauseValue::Number(v),
                })
            }
            _ => Err(self.err("expected a number")),
        }
    }

    fn clauses(&mut self, out: &mut Vec<Clause>) -> Result<()> {
        out.push(self.clause()?);
        while self.peek_kw("and") {
            self.at += 1;
            out.push(self.clause()?);
        }
        Ok(())
    }

    fn query(&mut self) -> Result<QueryAst> {
        let mut ast = if self.peek_kw("when") {
            self.at += 1;
            let action = if self.peek_kw("will") {
                self.at += 1;
                self.keyword("you")?;
                self.keyword("do")?;
                self.action()?
            } else {
                self.keyword("action")?;
                match self.peek() {
                    Some(Tok::Op(Comparator::Eq)) => self.at += 1,
                    _ => return Err(self.err("expected '='")),
                }
                self.action()?
            };
            QueryAst {
                kind: QueryKind::WhenAction,
                action: Some(action),
                predicates: Vec::new(),
            }
        } else if self.peek_kw("what") {
            self.at += 1;
            self.keyword("if")?;
            let mut predicates = Vec::new();
            self.clauses(&mut predicates)?;
            QueryAst {
                kind: QueryKind::WhatIf,
                action: None,
                predicates,
            }
        } else {
            return Err(self.err("expected 'when' or 'what if'"));
        };
        if ast.kind == QueryKind::WhenAction && self.peek_kw("and") {
            self.at += 1;
            self.clauses(&mut ast.predicates)?;
        }
        if matches!(self.peek(), Some(Tok::Question)) {
            self.at += 1;
        }
        if self.at != self.toks.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(ast)
    }
}

/// Parses a structured question. Keywords, names and labels are
/// case-insensitive.
pub fn parse_query(text: &str, ctx: QueryContext<'_>) -> Result<QueryAst> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        ctx,
    };
    p.query()
}

fn op_str(c: Comparator) -> &'static str {
    match c {
        Comparator::Lt => "<",
        Comparator::Le => "<=",
        Comparator::Gt => ">",
        Comparator::Ge => ">=",
        Comparator::Eq | Comparator::IsLevel => "=",
    }
}

/// Renders the statement. The action filter comes first, then feature
/// clauses ordered by feature index (stable for repeats).
pub fn to_sql(ast: &QueryAst, schema: &FeatureSchema) -> String {
    let mut parts = Vec::new();
    if let Some(a) = ast.action {
        parts.push(format!("action = {a}"));
    }
    let mut clauses: Vec<&Clause> = ast.predicates.iter().collect();
    clauses.sort_by_key(|c| c.feature);
    for c in clauses {
        let col = schema.features()[c.feature].column();
        match c.value {
            ClauseValue::Number(v) => parts.push(format!("{col} {} {v:?}", op_str(c.cmp))),
            ClauseValue::Level { lower, upper, .. } => {
                if let Some(lo) = lower {
                    parts.push(format!("{col} > {lo:?}"));
                }
                if let Some(hi) = upper {
                    parts.push(format!("{col} <= {hi:?}"));
                }
                if lower.is_none() && upper.is_none() {
                    parts.push("1 = 1".into());
                }
            }
        }
    }
    if parts.is_empty() {
        "SELECT * FROM replay".into()
    } else {
        format!("SELECT * FROM replay WHERE {}", parts.join(" AND "))
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::WhenAction => "when-action",
            QueryKind::WhatIf => "what-if",
        })
    }
}
