//! Expression trees over named coordinates.
//!
//! Expressions are immutable and shared through `Arc`, so a derivative can reuse
//! large parts of the tree it came from. First derivatives are memoized per node
//! and variable. [`Tape`] flattens a set of expressions into a straight-line
//! program that can be evaluated on any [`Scalar`], which is how jets get pushed
//! through catalog formulas.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

/// Arithmetic needed to push a value through an expression.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant_like(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn scale(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn atan(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn recip(&self) -> Self {
        self.constant_like(1.0) / self.clone()
    }
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply<T: Scalar>(self, a: &T) -> T {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Atan => a.atan(),
        }
    }
}

#[derive(Clone)]
enum Kind {
    Const(f64),
    Var(usize, Arc<str>),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Call(Func, Expr),
}

struct Node {
    kind: Kind,
    dcache: Mutex<HashMap<usize, Expr>>,
}

/// Immutable, cheaply clonable expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn wrap(kind: Kind) -> Expr {
        Expr(Arc::new(Node { kind, dcache: Mutex::new(HashMap::new()) }))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::wrap(Kind::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize, name: &str) -> Expr {
        Expr::wrap(Kind::Var(index, Arc::from(name)))
    }

    /// Variables `x_0..x_{n-1}` with the given names.
    pub fn vars(names: &[&str]) -> Vec<Expr> {
        names.iter().enumerate().map(|(i, n)| Expr::var(i, n)).collect()
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.0.kind {
            Kind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<usize> {
        match self.0.kind {
            Kind::Var(i, _) => Some(i),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn neg_expr(&self) -> Expr {
        match &self.0.kind {
            Kind::Const(c) => Expr::constant(-c),
            Kind::Neg(a) => a.clone(),
            _ => Expr::wrap(Kind::Neg(self.clone())),
        }
    }

    pub fn add_expr(&self, b: &Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b.clone(),
            (_, Some(y)) if y == 0.0 => self.clone(),
            _ => Expr::wrap(Kind::Add(self.clone(), b.clone())),
        }
    }

    pub fn sub_expr(&self, b: &Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => b.neg_expr(),
            (_, Some(y)) if y == 0.0 => self.clone(),
            _ => Expr::wrap(Kind::Sub(self.clone(), b.clone())),
        }
    }

    pub fn mul_expr(&self, b: &Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b.clone(),
            (_, Some(y)) if y == 1.0 => self.clone(),
            (Some(x), _) if x == -1.0 => b.neg_expr(),
            (_, Some(y)) if y == -1.0 => self.neg_expr(),
            _ => Expr::wrap(Kind::Mul(self.clone(), b.clone())),
        }
    }

    pub fn div_expr(&self, b: &Expr) -> Expr {
        match (self.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => self.clone(),
            _ => Expr::wrap(Kind::Div(self.clone(), b.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.as_const() {
            Some(c) => Expr::constant(c.powi(n)),
            None => Expr::wrap(Kind::Pow(self.clone(), n)),
        }
    }

    pub fn call(f: Func, a: &Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(f.apply(&c)),
            None => Expr::wrap(Kind::Call(f, a.clone())),
        }
    }

    pub fn sin(&self) -> Expr {
        Expr::call(Func::Sin, self)
    }
    pub fn cos(&self) -> Expr {
        Expr::call(Func::Cos, self)
    }
    pub fn tan(&self) -> Expr {
        Expr::call(Func::Tan, self)
    }
    pub fn exp(&self) -> Expr {
        Expr::call(Func::Exp, self)
    }
    pub fn log(&self) -> Expr {
        Expr::call(Func::Log, self)
    }
    pub fn sqrt(&self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }
    pub fn atan(&self) -> Expr {
        Expr::call(Func::Atan, self)
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        if let Some(d) = self.0.dcache.lock().unwrap().get(&var) {
            return d.clone();
        }
        let d = self.diff_uncached(var);
        self.0.dcache.lock().unwrap().insert(var, d.clone());
        d
    }

    fn diff_uncached(&self, v: usize) -> Expr {
        match &self.0.kind {
            Kind::Const(_) => Expr::zero(),
            Kind::Var(i, _) => {
                if *i == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Kind::Neg(a) => a.diff(v).neg_expr(),
            Kind::Add(a, b) => a.diff(v).add_expr(&b.diff(v)),
            Kind::Sub(a, b) => a.diff(v).sub_expr(&b.diff(v)),
            Kind::Mul(a, b) => a.diff(v).mul_expr(b).add_expr(&a.mul_expr(&b.diff(v))),
            Kind::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    return da.div_expr(b);
                }
                da.mul_expr(b).sub_expr(&a.mul_expr(&db)).div_expr(&b.powi(2))
            }
            Kind::Pow(a, n) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::constant(*n as f64).mul_expr(&a.powi(n - 1)).mul_expr(&da)
            }
            Kind::Call(f, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => a.sin().neg_expr(),
                    Func::Tan => Expr::one().add_expr(&self.powi(2)),
                    Func::Exp => self.clone(),
                    Func::Log => return da.div_expr(a),
                    Func::Sqrt => return da.div_expr(&Expr::constant(2.0).mul_expr(self)),
                    Func::Atan => return da.div_expr(&Expr::one().add_expr(&a.powi(2))),
                };
                outer.mul_expr(&da)
            }
        }
    }

    /// Repeated derivative, `order` times with respect to `var`.
    pub fn diff_n(&self, var: usize, order: usize) -> Expr {
        let mut e = self.clone();
        for _ in 0..order {
            e = e.diff(var);
        }
        e
    }

    /// Replace every variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        let mut memo: HashMap<*const Node, Expr> = HashMap::new();
        self.subst_rec(subs, &mut memo)
    }

    fn subst_rec(&self, subs: &[Expr], memo: &mut HashMap<*const Node, Expr>) -> Expr {
        let key = Arc::as_ptr(&self.0);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let out = match &self.0.kind {
            Kind::Const(_) => self.clone(),
            Kind::Var(i, _) => subs[*i].clone(),
            Kind::Neg(a) => a.subst_rec(subs, memo).neg_expr(),
            Kind::Add(a, b) => a.subst_rec(subs, memo).add_expr(&b.subst_rec(subs, memo)),
            Kind::Sub(a, b) => a.subst_rec(subs, memo).sub_expr(&b.subst_rec(subs, memo)),
            Kind::Mul(a, b) => a.subst_rec(subs, memo).mul_expr(&b.subst_rec(subs, memo)),
            Kind::Div(a, b) => a.subst_rec(subs, memo).div_expr(&b.subst_rec(subs, memo)),
            Kind::Pow(a, n) => a.subst_rec(subs, memo).powi(*n),
            Kind::Call(f, a) => Expr::call(*f, &a.subst_rec(subs, memo)),
        };
        memo.insert(key, out.clone());
        out
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        let tape = Tape::compile(std::slice::from_ref(self));
        tape.ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        Tape::compile(std::slice::from_ref(self)).eval(x, &0.0)[0]
    }

    pub fn eval_scalar<T: Scalar>(&self, x: &[T], proto: &T) -> T {
        Tape::compile(std::slice::from_ref(self)).eval(x, proto).swap_remove(0)
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        Tape::compile(std::slice::from_ref(self)).ops.len()
    }

    fn precedence(&self) -> u8 {
        match &self.0.kind {
            Kind::Add(..) | Kind::Sub(..) => 1,
            Kind::Mul(..) | Kind::Div(..) => 2,
            Kind::Neg(_) => 3,
            Kind::Pow(..) => 4,
            Kind::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 5,
            _ => 5,
        }
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_inner(f)?;
            write!(f, ")")
        } else {
            self.fmt_inner(f)
        }
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            Kind::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "({:?})", c)
                } else {
                    write!(f, "{:?}", c)
                }
            }
            Kind::Var(_, name) => write!(f, "{}", name),
            Kind::Neg(a) => {
                write!(f, "-")?;
                a.fmt_with(f, 3)
            }
            Kind::Add(a, b) => {
                a.fmt_with(f, 1)?;
                write!(f, " + ")?;
                b.fmt_with(f, 2)
            }
            Kind::Sub(a, b) => {
                a.fmt_with(f, 1)?;
                write!(f, " - ")?;
                b.fmt_with(f, 2)
            }
            Kind::Mul(a, b) => {
                a.fmt_with(f, 2)?;
                write!(f, "*")?;
                b.fmt_with(f, 3)
            }
            Kind::Div(a, b) => {
                a.fmt_with(f, 2)?;
                write!(f, "/")?;
                b.fmt_with(f, 3)
            }
            Kind::Pow(a, n) => {
                a.fmt_with(f, 5)?;
                write!(f, "^{}", n)
            }
            Kind::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_with(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $call:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                self.$call(&rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: &'a Expr) -> Expr {
                self.$call(rhs)
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                self.$call(&Expr::constant(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::constant(self).$call(&rhs)
            }
        }
    };
}

expr_binop!(Add, add, add_expr);
expr_binop!(Sub, sub, sub_expr);
expr_binop!(Mul, mul, mul_expr);
expr_binop!(Div, div, div_expr);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_expr()
    }
}

impl<'a> Neg for &'a Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_expr()
    }
}

// ---------------------------------------------------------------------------
// parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.') {
                end += 1;
            }
            if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                let mut k = end + 1;
                if k < self.src.len() && (self.src[k] == b'+' || self.src[k] == b'-') {
                    k += 1;
                }
                if k < self.src.len() && self.src[k].is_ascii_digit() {
                    while k < self.src.len() && self.src[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = std::str::from_utf8(&self.src[start..end]).unwrap();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("malformed number `{}`", text),
            })?;
            self.pos = end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < self.src.len()
                && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_' || self.src[end] == b'\'')
            {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[start..end]).unwrap().to_string();
            self.pos = end;
            return Ok((Tok::Ident(text), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), start));
        }
        Err(Error::Parse { pos: start, msg: format!("unexpected character `{}`", c as char) })
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, p) = self.lex.next()?;
        self.tok = t;
        self.tok_pos = p;
        Ok(())
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.tok == Tok::Sym(c) {
            self.bump()
        } else {
            Err(Error::Parse { pos: self.tok_pos, msg: format!("expected `{}`", c) })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Sym('+') => {
                    self.bump()?;
                    lhs = lhs.add_expr(&self.term()?);
                }
                Tok::Sym('-') => {
                    self.bump()?;
                    lhs = lhs.sub_expr(&self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Sym('*') => {
                    self.bump()?;
                    lhs = lhs.mul_expr(&self.unary()?);
                }
                Tok::Sym('/') => {
                    self.bump()?;
                    lhs = lhs.div_expr(&self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.tok {
            Tok::Sym('-') => {
                self.bump()?;
                Ok(self.unary()?.neg_expr())
            }
            Tok::Sym('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump()?;
        let mut sign = 1i32;
        if self.tok == Tok::Sym('-') {
            sign = -1;
            self.bump()?;
        } else if self.tok == Tok::Sym('+') {
            self.bump()?;
        }
        let pos = self.tok_pos;
        let n = match self.tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => {
                return Err(Error::Parse { pos, msg: "exponent must be an integer constant".into() });
            }
        };
        self.bump()?;
        if self.tok == Tok::Sym('^') {
            return Err(Error::Parse {
                pos: self.tok_pos,
                msg: "chained exponents need parentheses".into(),
            });
        }
        Ok(base.powi(sign * n))
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.tok_pos;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::constant(v))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::Sym('(') {
                    let f = Func::from_name(&name)
                        .ok_or_else(|| Error::UnknownName { pos, name: name.clone() })?;
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::call(f, &arg));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::var(i, &name));
                }
                if name == "pi" {
                    return Ok(Expr::constant(std::f64::consts::PI));
                }
                Err(Error::UnknownName { pos, name })
            }
            Tok::End => Err(Error::Parse { pos, msg: "unexpected end of input".into() }),
            Tok::Sym(c) => Err(Error::Parse { pos, msg: format!("unexpected `{}`", c) }),
        }
    }
}

/// Parse `source` over the named coordinates. Variable `vars[i]` becomes index `i`.
pub fn parse(source: &str, vars: &[&str]) -> Result<Expr> {
    let mut p = Parser {
        lex: Lexer { src: source.as_bytes(), pos: 0 },
        tok: Tok::End,
        tok_pos: 0,
        vars,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(Error::Parse { pos: p.tok_pos, msg: "trailing input".into() });
    }
    Ok(e)
}

/// Same as [`parse`] with owned names.
pub fn parse_with(source: &str, vars: &[String]) -> Result<Expr> {
    let v: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    parse(source, &v)
}

/// `d^order e / d var^order`, with `var` given by name.
pub fn derive(e: &Expr, var: &str, vars: &[&str], order: usize) -> Result<Expr> {
    if order > 3 {
        return Err(Error::Invalid(format!("derivative order {} exceeds 3", order)));
    }
    let i = vars
        .iter()
        .position(|v| *v == var)
        .ok_or_else(|| Error::UnknownName { pos: 0, name: var.to_string() })?;
    Ok(e.diff_n(i, order))
}

// ---------------------------------------------------------------------------
// tape

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

/// Straight-line program for a set of expressions, with shared nodes evaluated once.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    nvars: usize,
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut ops = Vec::new();
        let mut seen: HashMap<*const Node, usize> = HashMap::new();
        let mut outputs = Vec::with_capacity(exprs.len());
        for e in exprs {
            outputs.push(Self::emit(e, &mut ops, &mut seen));
        }
        let nvars = ops
            .iter()
            .filter_map(|op| match op {
                Op::Var(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Tape { ops, outputs, nvars }
    }

    fn emit(e: &Expr, ops: &mut Vec<Op>, seen: &mut HashMap<*const Node, usize>) -> usize {
        let key = Arc::as_ptr(&e.0);
        if let Some(&i) = seen.get(&key) {
            return i;
        }
        // explicit stack keeps deep chains off the call stack
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            let k = Arc::as_ptr(&node.0);
            if seen.contains_key(&k) {
                continue;
            }
            let children: Vec<&Expr> = match &node.0.kind {
                Kind::Const(_) | Kind::Var(..) => vec![],
                Kind::Neg(a) | Kind::Pow(a, _) | Kind::Call(_, a) => vec![a],
                Kind::Add(a, b) | Kind::Sub(a, b) | Kind::Mul(a, b) | Kind::Div(a, b) => vec![a, b],
            };
            if !expanded {
                let pending: Vec<Expr> = children
                    .iter()
                    .filter(|c| !seen.contains_key(&Arc::as_ptr(&c.0)))
                    .map(|c| (*c).clone())
                    .collect();
                if !pending.is_empty() {
                    stack.push((node.clone(), true));
                    for c in pending.into_iter().rev() {
                        stack.push((c, false));
                    }
                    continue;
                }
            }
            let idx = |c: &Expr| seen[&Arc::as_ptr(&c.0)];
            let op = match &node.0.kind {
                Kind::Const(c) => Op::Const(*c),
                Kind::Var(i, _) => Op::Var(*i),
                Kind::Neg(a) => Op::Neg(idx(a)),
                Kind::Add(a, b) => Op::Add(idx(a), idx(b)),
                Kind::Sub(a, b) => Op::Sub(idx(a), idx(b)),
                Kind::Mul(a, b) => Op::Mul(idx(a), idx(b)),
                Kind::Div(a, b) => Op::Div(idx(a), idx(b)),
                Kind::Pow(a, n) => Op::Pow(idx(a), *n),
                Kind::Call(f, a) => Op::Call(*f, idx(a)),
            };
            ops.push(op);
            seen.insert(k, ops.len() - 1);
        }
        seen[&key]
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Number of inputs the tape reads (largest variable index plus one).
    pub fn n_inputs(&self) -> usize {
        self.nvars
    }

    /// Evaluate all outputs. `proto` supplies the representation for constants.
    pub fn eval<T: Scalar>(&self, inputs: &[T], proto: &T) -> Vec<T> {
        assert!(inputs.len() >= self.nvars, "tape needs {} inputs, got {}", self.nvars, inputs.len());
        let mut vals: Vec<T> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => proto.constant_like(*c),
                Op::Var(i) => inputs[*i].clone(),
                Op::Neg(a) => -vals[*a].clone(),
                Op::Add(a, b) => vals[*a].clone() + vals[*b].clone(),
                Op::Sub(a, b) => vals[*a].clone() - vals[*b].clone(),
                Op::Mul(a, b) => vals[*a].clone() * vals[*b].clone(),
                Op::Div(a, b) => vals[*a].clone() / vals[*b].clone(),
                Op::Pow(a, n) => vals[*a].powi(*n),
                Op::Call(f, a) => f.apply(&vals[*a]),
            };
            vals.push(v);
        }
        self.outputs.iter().map(|&i| vals[i].clone()).collect()
    }

    pub fn eval_f64(&self, inputs: &[f64]) -> Vec<f64> {
        self.eval(inputs, &0.0)
    }
}
