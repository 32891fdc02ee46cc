//! Closed-form field expressions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! ident   := 'x' | 't' | 'pi' | 'q1' .. 'qN'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! Expressions are parsed once and sampled onto the space-time grid at model
//! build time; `q1..qN` are only meaningful in nonlinear reaction terms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    T,
    /// Zero-based state variable index (`q1` parses to `Q(0)`).
    Q(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            src,
            tokens,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Evaluate with state variables `q` (may be empty for coefficient fields).
    pub fn eval(&self, x: f64, t: f64, q: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::T => t,
            Expr::Q(i) => q.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval(x, t, q),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, t, q), b.eval(x, t, q));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, t, q)),
        }
    }

    /// Largest state index referenced, plus one.
    pub fn state_arity(&self) -> usize {
        match self {
            Expr::Q(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.state_arity(),
            Expr::Bin(_, a, b) => a.state_arity().max(b.state_arity()),
            _ => 0,
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::X => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on_x(),
            Expr::Bin(_, a, b) => a.depends_on_x() || b.depends_on_x(),
            _ => false,
        }
    }

    /// Symbolic partial derivative with respect to `q_{index}`.
    pub fn diff_q(&self, index: usize) -> Expr {
        use Expr::*;
        match self {
            Const(_) | X | T => Const(0.0),
            Q(i) => Const(if *i == index { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.diff_q(index))).simplify(),
            Bin(op, a, b) => {
                let (da, db) = (a.diff_q(index), b.diff_q(index));
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => bin(BinOp::Add, da, db),
                    BinOp::Sub => bin(BinOp::Sub, da, db),
                    BinOp::Mul => bin(
                        BinOp::Add,
                        bin(BinOp::Mul, da, b.clone()),
                        bin(BinOp::Mul, a, db),
                    ),
                    BinOp::Div => bin(
                        BinOp::Div,
                        bin(
                            BinOp::Sub,
                            bin(BinOp::Mul, da, b.clone()),
                            bin(BinOp::Mul, a, db),
                        ),
                        bin(BinOp::Mul, b.clone(), b),
                    ),
                    BinOp::Pow => {
                        // d(a^b) = a^b (db ln a + b da / a)
                        let pow = bin(BinOp::Pow, a.clone(), b.clone());
                        let term = bin(
                            BinOp::Add,
                            bin(BinOp::Mul, db, Call(Func::Log, Box::new(a.clone()))),
                            bin(BinOp::Div, bin(BinOp::Mul, b, da), a),
                        );
                        bin(BinOp::Mul, pow, term)
                    }
                }
            }
            Call(f, a) => {
                let da = a.diff_q(index);
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, Box::new(a)),
                    Func::Cos => Neg(Box::new(Call(Func::Sin, Box::new(a)))),
                    Func::Exp => Call(Func::Exp, Box::new(a)),
                    Func::Log => bin(BinOp::Div, Const(1.0), a),
                    Func::Sqrt => bin(
                        BinOp::Div,
                        Const(0.5),
                        Call(Func::Sqrt, Box::new(a)),
                    ),
                    Func::Abs => bin(
                        BinOp::Div,
                        a.clone(),
                        Call(Func::Abs, Box::new(a)),
                    ),
                };
                bin(BinOp::Mul, outer, da)
            }
        }
    }

    fn simplify(self) -> Expr {
        match self {
            Expr::Neg(a) => match *a {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            },
            other => other,
        }
    }
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    use Expr::Const;
    match (op, &a, &b) {
        (_, Const(x), Const(y)) => Const(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
            BinOp::Pow => x.powf(*y),
        }),
        (BinOp::Add, Const(z), _) if *z == 0.0 => b,
        (BinOp::Add | BinOp::Sub, _, Const(z)) if *z == 0.0 => a,
        (BinOp::Sub, Const(z), _) if *z == 0.0 => Expr::Neg(Box::new(b)),
        (BinOp::Mul, Const(z), _) | (BinOp::Mul, _, Const(z)) if *z == 0.0 => Const(0.0),
        (BinOp::Div, Const(z), _) if *z == 0.0 => Const(0.0),
        (BinOp::Mul, Const(o), _) if *o == 1.0 => b,
        (BinOp::Mul | BinOp::Div, _, Const(o)) if *o == 1.0 => a,
        _ => Expr::Bin(op, Box::new(a), Box::new(b)),
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => f.write_str("x"),
            Expr::T => f.write_str("t"),
            Expr::Q(i) => write!(f, "q{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part
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
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                expr: src.to_string(),
                pos: start,
                msg: format!("bad number literal '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                expr: src.to_string(),
                pos: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let pos = self
            .tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.src.len());
        Error::Parse {
            expr: self.src.to_string(),
            pos,
            msg: msg.to_string(),
        }
    }

    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Tok::Sym(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_sym() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_sym() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.pos += 1;
                    self.expect_sym('(')?;
                    let arg = self.expr()?;
                    self.expect_sym(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let e = match name.as_str() {
                    "x" => Expr::X,
                    "t" => Expr::T,
                    "pi" => Expr::Const(std::f64::consts::PI),
                    q if q.starts_with('q') && q.len() > 1 => match q[1..].parse::<usize>() {
                        Ok(k) if k >= 1 => Expr::Q(k - 1),
                        _ => return Err(self.error(&format!("unknown identifier '{name}'"))),
                    },
                    _ => return Err(self.error(&format!("unknown identifier '{name}'"))),
                };
                self.pos += 1;
                Ok(e)
            }
            Tok::Sym(c) => Err(self.error(&format!("unexpected '{c}'"))),
        }
    }
}
