//! Closed-form expressions in `t`, `x1..xn` and `u1..um`.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `x` and `u` are accepted as aliases of `x1` and `u1`.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Tanh => v.tanh(),
            Func::Atan => v.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    State(usize),
    Control(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable ranges an expression may reference.
#[derive(Debug, Clone, Copy)]
pub struct Vars {
    pub states: usize,
    pub controls: usize,
}

impl Expr {
    pub fn parse(src: &str, vars: Vars) -> Result<Expr> {
        let mut p = Parser {
            src,
            toks: tokenize(src)?,
            pos: 0,
            vars,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr(format!("unexpected trailing input in `{src}`")));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::State(i) => x[*i],
            Expr::Control(i) => u[*i],
            Expr::Neg(a) => -a.eval(t, x, u),
            Expr::Add(a, b) => a.eval(t, x, u) + b.eval(t, x, u),
            Expr::Sub(a, b) => a.eval(t, x, u) - b.eval(t, x, u),
            Expr::Mul(a, b) => a.eval(t, x, u) * b.eval(t, x, u),
            Expr::Div(a, b) => a.eval(t, x, u) / b.eval(t, x, u),
            Expr::Pow(a, b) => a.eval(t, x, u).powf(b.eval(t, x, u)),
            Expr::Min(a, b) => a.eval(t, x, u).min(b.eval(t, x, u)),
            Expr::Max(a, b) => a.eval(t, x, u).max(b.eval(t, x, u)),
            Expr::Call(f, a) => f.apply(a.eval(t, x, u)),
        }
    }

    /// Replaces every control variable by the matching entry of `u`.
    pub fn bind_controls(&self, u: &[f64]) -> Expr {
        let bin = |a: &Expr, b: &Expr| (Box::new(a.bind_controls(u)), Box::new(b.bind_controls(u)));
        match self {
            Expr::Control(i) => Expr::Const(u[*i]),
            Expr::Const(_) | Expr::Time | Expr::State(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.bind_controls(u))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.bind_controls(u))),
            Expr::Add(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Add(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Sub(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Mul(a, b)
            }
            Expr::Div(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Div(a, b)
            }
            Expr::Pow(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Pow(a, b)
            }
            Expr::Min(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Min(a, b)
            }
            Expr::Max(a, b) => {
                let (a, b) = bin(a, b);
                Expr::Max(a, b)
            }
        }
    }
}

/// A compiled vector-valued formula together with its source strings.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr {
    pub sources: Vec<String>,
    pub components: Vec<Expr>,
}

impl VectorExpr {
    pub fn parse<S: AsRef<str>>(sources: &[S], vars: Vars) -> Result<Self> {
        let components = sources
            .iter()
            .map(|s| Expr::parse(s.as_ref(), vars))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sources: sources.iter().map(|s| s.as_ref().to_string()).collect(),
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.components.iter().map(|e| e.eval(t, x, u)).collect()
    }

    pub fn eval_into(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(t, x, u);
        }
    }

    pub fn bind_controls(&self, u: &[f64]) -> Self {
        Self {
            sources: self.sources.clone(),
            components: self.components.iter().map(|e| e.bind_controls(u)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{s}` in `{src}`")))?;
            toks.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            toks.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Tok>,
    pos: usize,
    vars: Vars,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{c}` in `{}`", self.src)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expr(format!("unexpected end of `{}`", self.src)))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return self.call(&name, args);
                }
                self.variable(&name)
            }
            other => Err(Error::Expr(format!("unexpected `{other}` in `{}`", self.src))),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>) -> Result<Expr> {
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Expr(format!("`{name}` takes {n} argument(s) in `{}`", self.src)))
            }
        };
        match name {
            "min" | "max" | "pow" => {
                arity(2)?;
                let b = Box::new(args.pop().unwrap());
                let a = Box::new(args.pop().unwrap());
                Ok(match name {
                    "min" => Expr::Min(a, b),
                    "max" => Expr::Max(a, b),
                    _ => Expr::Pow(a, b),
                })
            }
            _ => {
                let f = Func::from_name(name)
                    .ok_or_else(|| Error::Expr(format!("unknown function `{name}` in `{}`", self.src)))?;
                arity(1)?;
                Ok(Expr::Call(f, Box::new(args.pop().unwrap())))
            }
        }
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        let indexed = |prefix: &str, limit: usize| -> Option<Result<usize>> {
            let rest = name.strip_prefix(prefix)?;
            let idx = if rest.is_empty() {
                1
            } else {
                rest.parse::<usize>().ok()?
            };
            Some(if idx >= 1 && idx <= limit {
                Ok(idx - 1)
            } else {
                Err(Error::Expr(format!(
                    "`{name}` out of range (have {limit}) in `{}`",
                    self.src
                )))
            })
        };
        match name {
            "t" => Ok(Expr::Time),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            _ => {
                if let Some(r) = indexed("x", self.vars.states) {
                    return r.map(Expr::State);
                }
                if let Some(r) = indexed("u", self.vars.controls) {
                    return r.map(Expr::Control);
                }
                Err(Error::Expr(format!("unknown variable `{name}` in `{}`", self.src)))
            }
        }
    }
}
