//! Defining-function expressions.
//!
//! Infix grammar over the coordinates `x1..xn`:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          exponent must fold to a constant
//! atom   := number | 'x' digits | func '(' expr ')' | '(' expr ')'
//! func   := sqrt | exp | log | sin | cos
//! ```
//!
//! Derivatives are symbolic: [`Expr::diff`] builds a new tree with constant
//! folding and the usual 0/1 identities, and [`SymbolicJet`] caches every
//! partial through third order so that [`eval_jet3`] is a plain tree walk.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{third_index, third_len, Jet3};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> std::result::Result<f64, &'static str> {
        match self {
            Func::Sqrt if v < 0.0 => Err("sqrt of a negative value"),
            Func::Sqrt => Ok(v.sqrt()),
            Func::Exp => Ok(v.exp()),
            Func::Log if v <= 0.0 => Err("log of a non-positive value"),
            Func::Log => Ok(v.ln()),
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
        }
    }
}

/// Expression tree. Variables are stored 0-based and printed 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

fn is_integer(k: f64) -> bool {
    k.fract() == 0.0 && k.abs() < 2f64.powi(31)
}

fn fmt_num(v: f64) -> String {
    if v < 0.0 {
        format!("(-{})", -v)
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", fmt_num(*c)),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a}^{})", fmt_num(*k)),
        }
    }
}

// Smart constructors: constant folding and 0/1 identities only.

fn konst(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (konst(&a), konst(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (konst(&a), konst(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (konst(&a), konst(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (konst(&a), konst(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: f64) -> Expr {
    if k == 0.0 {
        return Expr::Const(1.0);
    }
    if k == 1.0 {
        return a;
    }
    if let Some(c) = konst(&a) {
        if is_integer(k) && (c != 0.0 || k > 0.0) {
            return Expr::Const(c.powi(k as i32));
        }
        if c > 0.0 {
            return Expr::Const(c.powf(k));
        }
    }
    Expr::Pow(Box::new(a), k)
}

fn func(f: Func, a: Expr) -> Expr {
    if let Some(c) = konst(&a) {
        if let Ok(v) = f.apply(c) {
            return Expr::Const(v);
        }
    }
    Expr::Func(f, Box::new(a))
}

fn domain_error(node: &Expr, msg: &str) -> Error {
    let mut text = node.to_string();
    if text.len() > 96 {
        let cut = (0..=93).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
        text.truncate(cut);
        text.push_str("...");
    }
    Error::Domain {
        node: text,
        msg: msg.to_string(),
    }
}

impl Expr {
    /// Largest variable index used, 1-based (0 for constant trees).
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Func(f, a) => {
                let v = a.eval(x)?;
                f.apply(v).map_err(|m| domain_error(self, m))?
            }
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(domain_error(self, "division by zero"));
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(x)?;
                if is_integer(*k) {
                    if base == 0.0 && *k < 0.0 {
                        return Err(domain_error(self, "zero base with negative exponent"));
                    }
                    base.powi(*k as i32)
                } else {
                    if base <= 0.0 {
                        return Err(domain_error(self, "non-integer power of a non-positive base"));
                    }
                    (k * base.ln()).exp()
                }
            }
        };
        if !v.is_finite() {
            return Err(domain_error(self, "non-finite value"));
        }
        Ok(v)
    }

    /// Symbolic partial derivative with respect to `x_{var+1}`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                sub(
                    div(da, (**b).clone()),
                    div(mul((**a).clone(), db), pow((**b).clone(), 2.0)),
                )
            }
            Expr::Pow(a, k) => mul(mul(Expr::Const(*k), pow((**a).clone(), k - 1.0)), a.diff(var)),
            Expr::Func(f, a) => {
                let da = a.diff(var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sqrt => div(Expr::Const(0.5), func(Func::Sqrt, inner)),
                    Func::Exp => func(Func::Exp, inner),
                    Func::Log => div(Expr::Const(1.0), inner),
                    Func::Sin => func(Func::Cos, inner),
                    Func::Cos => neg(func(Func::Sin, inner)),
                };
                mul(outer, da)
            }
        }
    }

    pub fn scaled(self, a: f64) -> Expr {
        mul(Expr::Const(a), self)
    }

    pub fn plus(self, o: Expr) -> Expr {
        add(self, o)
    }

    pub fn times(self, o: Expr) -> Expr {
        mul(self, o)
    }
}

/// Parses `src` as an expression in `dim` variables.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    if dim == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.err("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        if exponent.max_var() > 0 {
            return Err(Error::Syntax {
                pos: at,
                msg: "exponent must be a constant".into(),
            });
        }
        let k = exponent.eval(&[]).map_err(|_| Error::Syntax {
            pos: at,
            msg: "exponent does not evaluate to a finite constant".into(),
        })?;
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        self.pos = i;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            _ => Err(Error::Syntax {
                pos: start,
                msg: format!("invalid number `{text}`"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_alphanumeric() {
            i += 1;
        }
        let word = std::str::from_utf8(&s[start..i]).expect("ascii");
        self.pos = i;
        if let Some(f) = Func::from_name(word) {
            if !self.eat(b'(') {
                return Err(self.err("expected '(' after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            return Ok(Expr::Func(f, Box::new(arg)));
        }
        if let Some(digits) = word.strip_prefix('x') {
            if let Ok(index) = digits.parse::<usize>() {
                if index == 0 || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("bad variable `{word}`"),
                    });
                }
                if index > self.dim {
                    return Err(Error::VariableOutOfRange {
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        Err(Error::Syntax {
            pos: start,
            msg: format!("unknown identifier `{word}`"),
        })
    }
}

/// All symbolic partials of an expression through third order.
#[derive(Debug, Clone)]
pub struct SymbolicJet {
    dim: usize,
    value: Expr,
    grad: Vec<Expr>,
    hess: Vec<Expr>,
    third: Vec<Expr>,
}

impl SymbolicJet {
    pub fn new(e: &Expr, dim: usize) -> Result<Self> {
        if e.max_var() > dim {
            return Err(Error::VariableOutOfRange {
                index: e.max_var(),
                dim,
            });
        }
        let grad: Vec<Expr> = (0..dim).map(|i| e.diff(i)).collect();
        let mut hess = vec![Expr::Const(0.0); dim * (dim + 1) / 2];
        for i in 0..dim {
            for j in 0..=i {
                hess[i * (i + 1) / 2 + j] = grad[i].diff(j);
            }
        }
        let mut third = vec![Expr::Const(0.0); third_len(dim)];
        for k in 0..dim {
            for j in 0..=k {
                for i in 0..=j {
                    third[third_index(i, j, k)] = hess[k * (k + 1) / 2 + j].diff(i);
                }
            }
        }
        Ok(Self {
            dim,
            value: e.clone(),
            grad,
            hess,
            third,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.value
    }

    pub fn partial(&self, i: usize) -> &Expr {
        &self.grad[i]
    }

    pub fn eval(&self, x: &[f64]) -> Result<Jet3> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let value = self.value.eval(x)?;
        let grad = self.grad.iter().map(|g| g.eval(x)).collect::<Result<Vec<_>>>()?;
        let mut hess = SymMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..=i {
                hess.set(i, j, self.hess[i * (i + 1) / 2 + j].eval(x)?);
            }
        }
        let third = self.third.iter().map(|t| t.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Jet3::from_parts(value, grad, hess, third))
    }
}

/// Value and exact derivatives through third order of `e` at `x`.
pub fn eval_jet3(e: &Expr, x: &[f64]) -> Result<Jet3> {
    SymbolicJet::new(e, x.len())?.eval(x)
}
