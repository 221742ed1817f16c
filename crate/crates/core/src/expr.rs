//! Arithmetic formula language for `Expression` aggregations.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := NUMBER | IDENT | STRING | FUNC '(' expr (',' expr)* ')' | '(' expr ')'
//! FUNC    := 'min' | 'max' | 'avg'
//! ```
//!
//! `IDENT` is `[A-Za-z_][A-Za-z0-9_]*`; ids that are not identifiers are
//! written as double-quoted strings with `\"` and `\\` escapes.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            Self::Add | Self::Sub => 1,
            Self::Mul | Self::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Min,
    Max,
    Avg,
}

impl Function {
    fn name(self) -> &'static str {
        match self {
            Self::Min => "min",
            Self::Max => "max",
            Self::Avg => "avg",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "min" => Some(Self::Min),
            "max" => Some(Self::Max),
            "avg" => Some(Self::Avg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Reference(String),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unresolved reference `{0}`")]
    UnresolvedReference(String),
    #[error("division by zero")]
    DivisionByZero,
}

impl Expr {
    /// Every referenced id, in first-occurrence order.
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Number(_) => {}
            Expr::Reference(id) => {
                if !out.contains(&id.as_str()) {
                    out.push(id);
                }
            }
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    /// True when some division has a literal zero divisor.
    pub fn divides_by_literal_zero(&self) -> bool {
        match self {
            Expr::Number(_) | Expr::Reference(_) => false,
            Expr::Neg(e) => e.divides_by_literal_zero(),
            Expr::Binary(op, l, r) => {
                let zero = *op == BinaryOp::Div && is_literal_zero(r);
                zero || l.divides_by_literal_zero() || r.divides_by_literal_zero()
            }
            Expr::Call(_, args) => args.iter().any(Expr::divides_by_literal_zero),
        }
    }
}

fn is_literal_zero(e: &Expr) -> bool {
    match e {
        Expr::Number(n) => *n == 0.0,
        Expr::Neg(inner) => is_literal_zero(inner),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Quoted(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            offset,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Token)>, ExprError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c.is_whitespace() {
                self.bump(c);
                continue;
            }
            let token = match c {
                '0'..='9' | '.' => self.number()?,
                'a'..='z' | 'A'..='Z' | '_' => {
                    let end = self.src[start..]
                        .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                        .map_or(self.src.len(), |i| start + i);
                    self.pos = end;
                    Token::Ident(self.src[start..end].to_string())
                }
                '"' => self.quoted()?,
                '+' | '-' | '*' | '/' => {
                    self.bump(c);
                    Token::Op(c)
                }
                '(' => {
                    self.bump(c);
                    Token::LParen
                }
                ')' => {
                    self.bump(c);
                    Token::RParen
                }
                ',' => {
                    self.bump(c);
                    Token::Comma
                }
                other => return Err(self.error(start, format!("unexpected character `{other}`"))),
            };
            out.push((start, token));
        }
        Ok(out)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn number(&mut self) -> Result<Token, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut exp = end + 1;
            if exp < bytes.len() && (bytes[exp] == b'+' || bytes[exp] == b'-') {
                exp += 1;
            }
            if exp < bytes.len() && bytes[exp].is_ascii_digit() {
                while exp < bytes.len() && bytes[exp].is_ascii_digit() {
                    exp += 1;
                }
                end = exp;
            }
        }
        let text = &self.src[start..end];
        self.pos = end;
        text.parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Token::Number)
            .ok_or_else(|| self.error(start, format!("malformed number `{text}`")))
    }

    fn quoted(&mut self) -> Result<Token, ExprError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error(start, "unterminated quoted reference"));
            };
            self.bump(c);
            match c {
                '"' => return Ok(Token::Quoted(out)),
                '\\' => match self.peek() {
                    Some(e @ ('"' | '\\')) => {
                        self.bump(e);
                        out.push(e);
                    }
                    _ => return Err(self.error(self.pos, "invalid escape in quoted reference")),
                },
                other => out.push(other),
            }
        }
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Token::Op('-')) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let at = self.offset();
        match self.next() {
            Some(Token::Number(n)) => Ok(Expr::Number(n)),
            Some(Token::Quoted(id)) => Ok(Expr::Reference(id)),
            Some(Token::Ident(name)) => match Function::from_name(&name) {
                Some(func) if self.peek() == Some(&Token::LParen) => {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Token::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen, "`)` after function arguments")?;
                    Ok(Expr::Call(func, args))
                }
                _ => Ok(Expr::Reference(name)),
            },
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(other) => Err(ExprError::Syntax {
                offset: at,
                message: format!("unexpected token {other:?}"),
            }),
            None => Err(ExprError::Syntax {
                offset: at,
                message: "unexpected end of formula".into(),
            }),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let tokens = Lexer { src: text, pos: 0 }.tokens()?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.error("trailing input"));
    }
    Ok(expr)
}

pub fn eval_expression(
    expr: &Expr,
    child_values: &BTreeMap<String, f64>,
) -> Result<f64, ExprError> {
    match expr {
        Expr::Number(n) => Ok(*n),
        Expr::Reference(id) => child_values
            .get(id)
            .copied()
            .ok_or_else(|| ExprError::UnresolvedReference(id.clone())),
        Expr::Neg(e) => Ok(-eval_expression(e, child_values)?),
        Expr::Binary(op, l, r) => {
            let l = eval_expression(l, child_values)?;
            let r = eval_expression(r, child_values)?;
            match op {
                BinaryOp::Add => Ok(l + r),
                BinaryOp::Sub => Ok(l - r),
                BinaryOp::Mul => Ok(l * r),
                BinaryOp::Div if r == 0.0 => Err(ExprError::DivisionByZero),
                BinaryOp::Div => Ok(l / r),
            }
        }
        Expr::Call(func, args) => {
            let values = args
                .iter()
                .map(|a| eval_expression(a, child_values))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(match func {
                Function::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
                Function::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Function::Avg => values.iter().sum::<f64>() / values.len() as f64,
            })
        }
    }
}

fn is_bare_identifier(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Writes a child id the way the lexer will read it back.
pub fn quote_reference(id: &str) -> String {
    if is_bare_identifier(id) {
        id.to_string()
    } else {
        let escaped = id.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        match self {
            Expr::Number(n) if *n < 0.0 || (*n == 0.0 && n.is_sign_negative()) => {
                write!(f, "(-{})", -n)
            }
            Expr::Number(n) => write!(f, "{n:?}"),
            Expr::Reference(id) => f.write_str(&quote_reference(id)),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 3)
            }
            Expr::Binary(op, l, r) => {
                let prec = op.precedence();
                let parens = prec < min_prec;
                if parens {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, prec)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative: a right operand of equal precedence needs parentheses
                r.fmt_prec(f, prec + 1)?;
                if parens {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
