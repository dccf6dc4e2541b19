//! The small expression language for source terms and test functions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('+' | '-') unary | primary
//! primary := number | 'x' | 'y' | 'pi' | '(' expr ')'
//!          | 'const' '(' expr ')' | 'sin' '(' expr ')'
//!          | 'bump' '(' expr ',' expr [',' expr] ')'
//! ```
//!
//! `bump(a, b, t)` is `exp(1 - 1/(1 - τ²))` with `τ = (2t - a - b)/(b - a)`
//! inside `(a, b)` and 0 elsewhere: smooth, supported on `[a, b]`, peak 1.
//! `t` defaults to `x`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Coordinate `x` (0) or `y` (1).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Bump(Box<Expr>, Box<Expr>, Box<Expr>),
}

pub fn bump(a: f64, b: f64, t: f64) -> f64 {
    if !(t > a && t < b) {
        return 0.0;
    }
    let tau = (2.0 * t - a - b) / (b - a);
    (1.0 - 1.0 / (1.0 - tau * tau)).exp()
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        use Expr::*;
        match self {
            Num(v) => *v,
            Var(k) => x.get(*k).copied().unwrap_or(0.0),
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Sin(a) => a.eval(x).sin(),
            Bump(a, b, t) => bump(a.eval(x), b.eval(x), t.eval(x)),
        }
    }

    /// Number of coordinates the expression reads (0, 1 or 2).
    pub fn arity(&self) -> usize {
        use Expr::*;
        match self {
            Num(_) => 0,
            Var(k) => k + 1,
            Neg(a) | Sin(a) => a.arity(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.arity().max(b.arity()),
            Bump(a, b, t) => a.arity().max(b.arity()).max(t.arity()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression { column: self.pos + 1, message: message.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect(b'(')?;
        let mut out = vec![self.expr()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            out.push(self.expr()?);
        }
        self.expect(b')')?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of expression"));
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            let at = start;
            return match name {
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "pi" => Ok(Expr::Num(PI)),
                "const" | "sin" | "bump" => {
                    let mut a = self.args()?;
                    let want = match name {
                        "bump" => 2..=3,
                        _ => 1..=1,
                    };
                    if !want.contains(&a.len()) {
                        self.pos = at;
                        return Err(self.error(&format!("`{name}` takes {} arguments, got {}", show(&want), a.len())));
                    }
                    Ok(match name {
                        "const" => a.remove(0),
                        "sin" => Expr::Sin(Box::new(a.remove(0))),
                        _ => {
                            let t = if a.len() == 3 { a.pop().expect("len 3") } else { Expr::Var(0) };
                            let b = a.pop().expect("len 2");
                            let lo = a.pop().expect("len 1");
                            Expr::Bump(Box::new(lo), Box::new(b), Box::new(t))
                        }
                    })
                }
                _ => {
                    self.pos = at;
                    Err(self.error(&format!("unknown name `{name}`")))
                }
            };
        }
        Err(self.error(&format!("unexpected character `{}`", c as char)))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                self.pos = q;
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Expr::Num).map_err(|_| {
            self.pos = start;
            self.error(&format!("invalid number `{text}`"))
        })
    }
}

fn show(r: &std::ops::RangeInclusive<usize>) -> String {
    if r.start() == r.end() {
        r.start().to_string()
    } else {
        format!("{} or {}", r.start(), r.end())
    }
}
