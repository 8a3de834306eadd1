//! Tiny arithmetic expression language used for CPD entries and utilities.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | number | name | '(' expr ')'
//! ```
//!
//! A CPD entry may also be the bare residual marker `_`, meaning "one minus
//! the sum of the other entries in this row". Evaluation carries exact
//! forward-mode derivatives with respect to every parameter, so CPD and
//! utility Jacobians never involve numerical differentiation.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Index into the game's parameter vector.
    Param(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Row completion marker; only valid as a whole CPD entry.
    Residual,
}

/// Value together with its gradient with respect to the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Dual {
    fn constant(value: f64, d: usize) -> Self {
        Dual {
            value,
            grad: vec![0.0; d],
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn is_residual(&self) -> bool {
        matches!(self, Expr::Residual)
    }

    fn contains_residual(&self) -> bool {
        match self {
            Expr::Residual => true,
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Neg(a) => a.contains_residual(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.contains_residual() || b.contains_residual()
            }
        }
    }

    /// Largest parameter index referenced, if any.
    pub fn max_param(&self) -> Option<usize> {
        match self {
            Expr::Param(k) => Some(*k),
            Expr::Num(_) | Expr::Residual => None,
            Expr::Neg(a) => a.max_param(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.max_param().max(b.max_param()),
        }
    }

    /// Evaluate at `theta`. The residual marker cannot be evaluated on its own.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Param(k) => theta[*k],
            Expr::Neg(a) => -a.eval(theta),
            Expr::Add(a, b) => a.eval(theta) + b.eval(theta),
            Expr::Sub(a, b) => a.eval(theta) - b.eval(theta),
            Expr::Mul(a, b) => a.eval(theta) * b.eval(theta),
            Expr::Div(a, b) => a.eval(theta) / b.eval(theta),
            Expr::Residual => panic!("residual marker evaluated outside a CPD row"),
        }
    }

    /// Value and exact gradient with respect to all `theta` components.
    pub fn eval_dual(&self, theta: &[f64]) -> Dual {
        let d = theta.len();
        match self {
            Expr::Num(v) => Dual::constant(*v, d),
            Expr::Param(k) => {
                let mut out = Dual::constant(theta[*k], d);
                out.grad[*k] = 1.0;
                out
            }
            Expr::Neg(a) => {
                let mut x = a.eval_dual(theta);
                x.value = -x.value;
                x.grad.iter_mut().for_each(|g| *g = -*g);
                x
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let sign = if matches!(self, Expr::Add(..)) { 1.0 } else { -1.0 };
                let mut x = a.eval_dual(theta);
                let y = b.eval_dual(theta);
                x.value += sign * y.value;
                for (g, h) in x.grad.iter_mut().zip(&y.grad) {
                    *g += sign * h;
                }
                x
            }
            Expr::Mul(a, b) => {
                let x = a.eval_dual(theta);
                let y = b.eval_dual(theta);
                Dual {
                    value: x.value * y.value,
                    grad: x
                        .grad
                        .iter()
                        .zip(&y.grad)
                        .map(|(gx, gy)| gx * y.value + x.value * gy)
                        .collect(),
                }
            }
            Expr::Div(a, b) => {
                let x = a.eval_dual(theta);
                let y = b.eval_dual(theta);
                let q = x.value / y.value;
                Dual {
                    value: q,
                    grad: x
                        .grad
                        .iter()
                        .zip(&y.grad)
                        .map(|(gx, gy)| (gx - q * gy) / y.value)
                        .collect(),
                }
            }
            Expr::Residual => panic!("residual marker evaluated outside a CPD row"),
        }
    }

    /// Render in the document grammar, resolving parameter names.
    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.render_into(&mut s, names, 0);
        s
    }

    // prec: 0 = expr context, 1 = term context, 2 = factor context
    fn render_into(&self, out: &mut String, names: &[String], prec: u8) {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    out.push('-');
                    write!(out, "{}", -v).unwrap();
                } else {
                    write!(out, "{}", v).unwrap();
                }
            }
            Expr::Param(k) => out.push_str(&names[*k]),
            Expr::Residual => out.push('_'),
            Expr::Neg(a) => {
                out.push('-');
                a.render_into(out, names, 2);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                if prec > 0 {
                    out.push('(');
                }
                a.render_into(out, names, 0);
                out.push_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " });
                b.render_into(out, names, 1);
                if prec > 0 {
                    out.push(')');
                }
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                if prec > 1 {
                    out.push('(');
                }
                a.render_into(out, names, 1);
                out.push_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" });
                b.render_into(out, names, 2);
                if prec > 1 {
                    out.push(')');
                }
            }
        }
    }
}

/// Evaluate one CPD row, completing a residual entry if present.
pub fn eval_row(row: &[Expr], theta: &[f64]) -> Vec<Dual> {
    let d = theta.len();
    let mut out: Vec<Option<Dual>> = row
        .iter()
        .map(|e| (!e.is_residual()).then(|| e.eval_dual(theta)))
        .collect();
    if let Some(pos) = row.iter().position(Expr::is_residual) {
        let mut rest = Dual {
            value: 1.0,
            grad: vec![0.0; d],
        };
        for x in out.iter().flatten() {
            rest.value -= x.value;
            for (g, h) in rest.grad.iter_mut().zip(&x.grad) {
                *g -= h;
            }
        }
        out[pos] = Some(rest);
    }
    out.into_iter().map(Option::unwrap).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    names: &'a [String],
    end: usize,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if "+-*/()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Name(src[start..i].to_string())));
        } else {
            return Err(Error::Syntax {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.here(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                let inner = self.factor()?;
                Ok(match inner {
                    Expr::Num(v) => Expr::Num(-v),
                    other => Expr::Neg(Box::new(other)),
                })
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Name(name)) => {
                if name == "_" {
                    self.pos += 1;
                    return Ok(Expr::Residual);
                }
                match self.names.iter().position(|n| *n == name) {
                    Some(k) => {
                        self.pos += 1;
                        Ok(Expr::Param(k))
                    }
                    None => Err(Error::UnknownParameter(name)),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::Op(')')) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => self.err("expected `)`"),
                }
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parse an expression, resolving names against `names`.
///
/// The residual marker `_` is accepted only when it is the whole input.
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        names,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    if e.contains_residual() && !e.is_residual() {
        return Err(Error::Syntax {
            position: src.find('_').unwrap_or(0),
            message: "residual marker `_` must be a whole entry".into(),
        });
    }
    Ok(e)
}
