//! Closed-form coupling functions `λ(x, y)`.
//!
//! A small recursive-descent parser over the grammar
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | tanh | abs
//! ```
//!
//! so `^` binds tighter than unary minus and associates to the right
//! (`-2^2 = -4`, `2^3^2 = 512`). Smoothness of `λ` is the caller's business.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnknownIdentifier(String),
    BadNumber(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token {t:?}"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier {s:?}"),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number {s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Parsed coupling expression.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingExpr {
    Num(f64),
    X,
    Y,
    Neg(Box<CouplingExpr>),
    Call(Func, Box<CouplingExpr>),
    Bin(BinOp, Box<CouplingExpr>, Box<CouplingExpr>),
}

impl CouplingExpr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        parse(src)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok(match self {
            CouplingExpr::Num(v) => *v,
            CouplingExpr::X => x,
            CouplingExpr::Y => y,
            CouplingExpr::Neg(e) => -e.eval(x, y)?,
            CouplingExpr::Call(f, e) => f.apply(e.eval(x, y)?),
            CouplingExpr::Bin(op, l, r) => {
                let (l, r) = (l.eval(x, y)?, r.eval(x, y)?);
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div if r == 0.0 => return Err(EvalError::DivisionByZero),
                    BinOp::Div => l / r,
                    BinOp::Pow if l == 0.0 && r < 0.0 => {
                        return Err(EvalError::ZeroToNegativePower)
                    }
                    BinOp::Pow => l.powf(r),
                }
            }
        })
    }
}

/// Fully parenthesized, so printing and re-parsing gives back the same tree.
impl fmt::Display for CouplingExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingExpr::Num(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            CouplingExpr::Num(v) => write!(f, "{v:?}"),
            CouplingExpr::X => f.write_str("x"),
            CouplingExpr::Y => f.write_str("y"),
            CouplingExpr::Neg(e) => write!(f, "(-{e})"),
            CouplingExpr::Call(func, e) => write!(f, "{}({e})", func.name()),
            CouplingExpr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl FromStr for CouplingExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v = text.parse::<f64>().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: i,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(describe(t))),
            None => self.err(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Tok::Op(c)) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<CouplingExpr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = CouplingExpr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<CouplingExpr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = CouplingExpr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<CouplingExpr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(CouplingExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<CouplingExpr, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(CouplingExpr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected()),
        }
    }

    fn primary(&mut self) -> Result<CouplingExpr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err(ParseErrorKind::UnexpectedEnd));
        };
        let at = self.offset();
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(CouplingExpr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(CouplingExpr::X),
                    "y" => Ok(CouplingExpr::Y),
                    _ => {
                        let func = Func::from_name(&name).ok_or(ParseError {
                            offset: at,
                            kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                        })?;
                        if self.peek() != Some(&Tok::LParen) {
                            return Err(self.unexpected());
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(CouplingExpr::Call(func, Box::new(arg)))
                    }
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses a coupling expression. Errors carry the byte offset of the problem.
pub fn parse(src: &str) -> Result<CouplingExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

/// The coupling `λ` of the nonlinearity: a constant or an expression in `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Constant(f64),
    Expr(CouplingExpr),
}

impl Coupling {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(match parse(src)? {
            CouplingExpr::Num(v) => Coupling::Constant(v),
            CouplingExpr::Neg(e) if matches!(*e, CouplingExpr::Num(_)) => {
                let CouplingExpr::Num(v) = *e else {
                    unreachable!()
                };
                Coupling::Constant(-v)
            }
            e => Coupling::Expr(e),
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        match self {
            Coupling::Constant(v) => Ok(*v),
            Coupling::Expr(e) => e.eval(x, y),
        }
    }

    /// True only for the literal constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Coupling::Constant(v) if *v == 0.0)
    }

    pub fn negated(&self) -> Coupling {
        match self {
            Coupling::Constant(v) => Coupling::Constant(-v),
            Coupling::Expr(e) => Coupling::Expr(CouplingExpr::Neg(Box::new(e.clone()))),
        }
    }

    /// `λ(x_scale·xᵢ, yₗ)` on a tensor grid, `xs.len() × ys.len()`.
    pub fn sample(
        &self,
        xs: &[f64],
        ys: &[f64],
        x_scale: f64,
    ) -> Result<ndarray::Array2<f64>, EvalError> {
        let mut out = ndarray::Array2::zeros((xs.len(), ys.len()));
        match self {
            Coupling::Constant(v) => out.fill(*v),
            Coupling::Expr(e) => {
                for (i, &x) in xs.iter().enumerate() {
                    for (l, &y) in ys.iter().enumerate() {
                        out[[i, l]] = e.eval(x_scale * x, y)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl From<f64> for Coupling {
    fn from(v: f64) -> Self {
        Coupling::Constant(v)
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Constant(v) => write!(f, "{v:?}"),
            Coupling::Expr(e) => e.fmt(f),
        }
    }
}
