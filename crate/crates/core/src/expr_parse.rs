//! Prefix-notation reader for [`Expr`].
//!
//! Grammar: an atom is a number, `x`, or `x<k>` (coordinate k, one-based);
//! a list is `(op arg ...)` with `op` one of `add mul sub div neg pow exp
//! log primitive`. The reader builds nodes verbatim (no folding), so
//! `expr.to_string().parse()` reproduces the same text.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::primitive::TabulatedPrimitive;

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(s: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                    i += 1;
                }
                out.push((start, Token::Atom(&s[start..i])));
            }
        }
    }
    out
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let at = self.tokens.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        Err(Error::Parse {
            pos: at,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.tokens.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn number(&self, a: &str) -> Option<f64> {
        a.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Atom(a)) => self.atom(a),
            Some(Token::Open) => self.list(),
            Some(Token::Close) => {
                self.pos -= 1;
                self.err("unexpected `)`")
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn atom(&mut self, a: &str) -> Result<Expr> {
        if a == "x" {
            return Ok(Expr::X);
        }
        if let Some(rest) = a.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 {
                    return Ok(Expr::Coord(k - 1));
                }
            }
        }
        match self.number(a) {
            Some(v) => Ok(Expr::Const(v)),
            None => {
                self.pos -= 1;
                self.err(format!("unknown atom `{a}`"))
            }
        }
    }

    fn args_until_close(&mut self) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        loop {
            match self.tokens.get(self.pos).map(|t| &t.1) {
                Some(Token::Close) => {
                    self.pos += 1;
                    return Ok(args);
                }
                None => return self.err("missing `)`"),
                _ => args.push(self.expr()?),
            }
        }
    }

    fn literal(&mut self) -> Result<f64> {
        match self.next() {
            Some(Token::Atom(a)) => match self.number(a) {
                Some(v) => Ok(v),
                None => {
                    self.pos -= 1;
                    self.err(format!("expected a number, found `{a}`"))
                }
            },
            _ => {
                self.pos -= 1;
                self.err("expected a number")
            }
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.next() {
            Some(Token::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                self.err("expected `)`")
            }
        }
    }

    fn list(&mut self) -> Result<Expr> {
        let op = match self.next() {
            Some(Token::Atom(a)) => a,
            _ => {
                self.pos -= 1;
                return self.err("expected an operator name");
            }
        };
        let op_pos = self.pos - 1;
        let arity_err = |p: &mut Self, want: &str| -> Result<Expr> {
            p.pos = op_pos;
            p.err(format!("`{op}` expects {want}"))
        };
        match op {
            "add" | "mul" => {
                let args = self.args_until_close()?;
                if args.len() < 2 {
                    return arity_err(self, "at least two arguments");
                }
                Ok(if op == "add" {
                    Expr::Sum(args)
                } else {
                    Expr::Product(args)
                })
            }
            "sub" | "div" => {
                let mut args = self.args_until_close()?;
                if args.len() != 2 {
                    return arity_err(self, "two arguments");
                }
                let b = Box::new(args.pop().unwrap());
                let a = Box::new(args.pop().unwrap());
                Ok(if op == "sub" { Expr::Sub(a, b) } else { Expr::Div(a, b) })
            }
            "neg" | "exp" | "log" => {
                let mut args = self.args_until_close()?;
                if args.len() != 1 {
                    return arity_err(self, "one argument");
                }
                let a = Box::new(args.pop().unwrap());
                Ok(match op {
                    "neg" => Expr::Neg(a),
                    "exp" => Expr::Exp(a),
                    _ => Expr::Log(a),
                })
            }
            "pow" => {
                let base = self.expr()?;
                let p = self.literal()?;
                self.close()?;
                Ok(Expr::Pow(Box::new(base), p))
            }
            "primitive" => {
                let integrand = self.expr()?;
                let lo = self.literal()?;
                let hi = self.literal()?;
                let anchor = self.literal()?;
                let arg = self.expr()?;
                self.close()?;
                let table = TabulatedPrimitive::new(integrand, lo, hi, anchor)?;
                Ok(Expr::Primitive(Arc::new(table), Box::new(arg)))
            }
            "custom" => {
                self.pos = op_pos;
                self.err("custom functions cannot be read from text; register them in code")
            }
            other => {
                self.pos = op_pos;
                self.err(format!("unknown operator `{other}`"))
            }
        }
    }
}

pub fn parse(s: &str) -> Result<Expr> {
    let mut p = Parser {
        tokens: tokenize(s),
        pos: 0,
        len: s.len(),
    };
    let e = p.expr()?;
    if p.pos < p.tokens.len() {
        return p.err("trailing input");
    }
    Ok(e)
}
