//! A small expression language for Lagrangians, metrics and curves, evaluated over jets.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | variable | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x0^2` is `-(x0^2)`.
//! Variables are `x0 … x{dim−1}` with primes for time derivatives: `x0'`, `x0''`, `x0'3`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::bundles::CurveEvaluator;
use crate::error::{Error, ParseErrorKind, Result, SourcePos};
use crate::geometry::{JetMatrix, MetricField};
use crate::variational::Lagrangian;
use crate::weil::{JetScalar, JetShape};

/// Integer literal exponents up to this size are expanded into repeated products.
const MAX_LITERAL_POWER: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// `x{index}` differentiated `order` times.
    Coord { index: usize, order: usize },
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Atan];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A syntax-tree node with the position of the token that produced it.
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub pos: SourcePos,
}

/// Structural equality; source positions are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Bin(o, a, b), Node::Bin(p, c, d)) => o == p && a == c && b == d,
            (Node::Call(f, a), Node::Call(g, b)) => f == g && a == b,
            _ => false,
        }
    }
}

// binding strength used by the printer
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn new(node: Node) -> Expr {
        Expr {
            node,
            pos: SourcePos { line: 1, column: 1 },
        }
    }

    fn prec(&self) -> u8 {
        match &self.node {
            Node::Num(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_NEG,
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            Node::Bin(BinOp::Pow, ..) => PREC_POW,
        }
    }

    /// Calls `f` on every variable occurrence.
    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match &self.node {
            Node::Num(_) => {}
            Node::Var(v) => f(*v),
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(f),
            Node::Bin(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn is_constant(&self) -> bool {
        let mut c = true;
        self.visit_vars(&mut |_| c = false);
        c
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(Var::Time) => write!(f, "t"),
            Node::Var(Var::Coord { index, order }) => {
                write!(f, "x{index}")?;
                match order {
                    0 => Ok(()),
                    1 => write!(f, "'"),
                    2 => write!(f, "''"),
                    n => write!(f, "'{n}"),
                }
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, a.prec() < PREC_NEG)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Bin(op, a, b) => {
                let p = self.prec();
                if *op == BinOp::Pow {
                    write_child(f, a, a.prec() <= PREC_POW)?;
                    write!(f, "^")?;
                    write_child(f, b, b.prec() < PREC_NEG)
                } else {
                    write_child(f, a, a.prec() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, b, b.prec() <= p)
                }
            }
        }
    }
}

/// Which variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseContext {
    pub dim: usize,
    /// Highest derivative order accepted on coordinates.
    pub max_order: usize,
    pub allow_time: bool,
}

impl ParseContext {
    /// Lagrangian on `T^k R^dim`.
    pub fn lagrangian(dim: usize, k: usize) -> Self {
        ParseContext {
            dim,
            max_order: k,
            allow_time: false,
        }
    }

    /// Metric coefficients: coordinates without derivatives.
    pub fn metric(dim: usize) -> Self {
        ParseContext {
            dim,
            max_order: 0,
            allow_time: false,
        }
    }

    /// Curve or variation component: a function of `t` alone.
    pub fn curve() -> Self {
        ParseContext {
            dim: 0,
            max_order: 0,
            allow_time: true,
        }
    }
}

/// A parsed, immutable expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Expr,
    context: ParseContext,
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl Expression {
    pub fn parse(source: &str, context: ParseContext) -> Result<Expression> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            at: 0,
            context,
        };
        let root = p.expr()?;
        let tok = p.peek();
        if tok.kind != Tok::End {
            return Err(syntax(tok.pos, format!("unexpected {}", tok.kind.describe())));
        }
        Ok(Expression { root, context })
    }

    /// Wrap a tree built in code; variables are checked against `context`.
    pub fn from_tree(root: Expr, context: ParseContext) -> Result<Expression> {
        let mut err = None;
        root.visit_vars(&mut |v| {
            if err.is_none() {
                err = check_var(v, &context, root.pos).err();
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Expression { root, context }),
        }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn context(&self) -> ParseContext {
        self.context
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    /// Evaluate over jets of `shape`; `coords[a][α]` binds `x{a}` differentiated `α` times.
    pub fn evaluate(
        &self,
        shape: &Arc<JetShape>,
        coords: &[Vec<JetScalar>],
        time: Option<&JetScalar>,
    ) -> Result<JetScalar> {
        let env = Env {
            coords,
            time,
            shape: shape.clone(),
        };
        eval(&self.root, &env)
    }

    /// Plain `f64` evaluation; agrees bit for bit with [`Expression::evaluate`] on shape `()`.
    pub fn evaluate_scalar(&self, coords: &[Vec<f64>], time: Option<f64>) -> Result<f64> {
        let env = Env {
            coords,
            time: time.as_ref(),
            shape: (),
        };
        eval(&self.root, &env)
    }
}

// ---- lexer -------------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    /// Identifier with an optional derivative order given by primes.
    Ident(String, Option<usize>),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s, _) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    pos: SourcePos,
}

fn syntax(pos: SourcePos, message: String) -> Error {
    Error::Parse {
        kind: ParseErrorKind::Syntax,
        pos,
        message,
    }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = SourcePos { line, column: col };
        let start = i;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let kind = if c.is_ascii_digit() || c == '.' {
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
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Tok::Num(v),
                _ => return Err(syntax(pos, format!("malformed number `{text}`"))),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let mut primes = 0;
            while i < chars.len() && chars[i] == '\'' {
                primes += 1;
                i += 1;
            }
            let order = if primes == 1 && i < chars.len() && chars[i].is_ascii_digit() {
                let d0 = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[d0..i].iter().collect();
                Some(text.parse::<usize>().map_err(|_| {
                    syntax(pos, format!("derivative order `{text}` is too large"))
                })?)
            } else if primes > 0 {
                Some(primes)
            } else {
                None
            };
            Tok::Ident(name, order)
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(syntax(pos, format!("unexpected character `{c}`"))),
            }
        };
        col += i - start;
        out.push(Token { kind, pos });
    }
    out.push(Token {
        kind: Tok::End,
        pos: SourcePos { line, column: col },
    });
    Ok(out)
}

// ---- parser ------------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    context: ParseContext,
}

fn check_var(v: Var, ctx: &ParseContext, pos: SourcePos) -> Result<()> {
    match v {
        Var::Time if !ctx.allow_time => Err(Error::Parse {
            kind: ParseErrorKind::UnknownIdentifier,
            pos,
            message: "`t` is only available in curve and variation expressions".into(),
        }),
        Var::Coord { index, .. } if index >= ctx.dim => Err(Error::Parse {
            kind: ParseErrorKind::UnknownIdentifier,
            pos,
            message: format!("unknown coordinate `x{index}` (dimension {})", ctx.dim),
        }),
        Var::Coord { order, .. } if order > ctx.max_order => Err(Error::Parse {
            kind: ParseErrorKind::OrderOverflow,
            pos,
            message: format!(
                "derivative order {order} exceeds the maximum {}",
                ctx.max_order
            ),
        }),
        _ => Ok(()),
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.kind != Tok::End {
            self.at += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<(char, SourcePos)> {
        match self.peek().kind {
            Tok::Op(c) if ops.contains(&c) => {
                let pos = self.next().pos;
                Some((c, pos))
            }
            _ => None,
        }
    }

    fn binary(op: char, a: Expr, b: Expr, pos: SourcePos) -> Expr {
        let op = match op {
            '+' => BinOp::Add,
            '-' => BinOp::Sub,
            '*' => BinOp::Mul,
            '/' => BinOp::Div,
            _ => BinOp::Pow,
        };
        Expr {
            node: Node::Bin(op, Box::new(a), Box::new(b)),
            pos,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some((op, pos)) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some((op, pos)) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some((_, pos)) = self.eat_op(&['-']) {
            let inner = self.unary()?;
            return Ok(Expr {
                node: Node::Neg(Box::new(inner)),
                pos,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some((op, pos)) = self.eat_op(&['^']) {
            let exp = self.unary()?;
            return Ok(Self::binary(op, base, exp, pos));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.next();
        let pos = tok.pos;
        let node = match tok.kind {
            Tok::Num(v) => Node::Num(v),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(pos)?;
                return Ok(inner);
            }
            Tok::Ident(name, order) => return self.ident(name, order, pos),
            other => {
                return Err(syntax(
                    pos,
                    format!("expected a number, variable or `(`, found {}", other.describe()),
                ))
            }
        };
        Ok(Expr { node, pos })
    }

    fn expect_rparen(&mut self, open: SourcePos) -> Result<()> {
        let tok = self.next();
        if tok.kind != Tok::RParen {
            return Err(syntax(
                tok.pos,
                format!(
                    "expected `)` to close `(` at {open}, found {}",
                    tok.kind.describe()
                ),
            ));
        }
        Ok(())
    }

    fn ident(&mut self, name: String, order: Option<usize>, pos: SourcePos) -> Result<Expr> {
        if let Some(func) = Func::from_name(&name) {
            if order.is_some() {
                return Err(syntax(pos, format!("`{name}` cannot carry primes")));
            }
            let open = self.next();
            if open.kind != Tok::LParen {
                return Err(syntax(open.pos, format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            self.expect_rparen(open.pos)?;
            return Ok(Expr {
                node: Node::Call(func, Box::new(arg)),
                pos,
            });
        }
        let var = match name.as_str() {
            "pi" if order.is_none() => {
                return Ok(Expr {
                    node: Node::Num(PI),
                    pos,
                })
            }
            "t" if order.is_none() => Var::Time,
            _ => match name.strip_prefix('x').map(|d| d.parse::<usize>()) {
                Some(Ok(index)) if name[1..].chars().all(|c| c.is_ascii_digit()) => Var::Coord {
                    index,
                    order: order.unwrap_or(0),
                },
                _ => {
                    return Err(Error::Parse {
                        kind: ParseErrorKind::UnknownIdentifier,
                        pos,
                        message: format!("unknown identifier `{name}`"),
                    })
                }
            },
        };
        check_var(var, &self.context, pos)?;
        Ok(Expr {
            node: Node::Var(var),
            pos,
        })
    }
}

// ---- evaluation --------------------------------------------------------------------------

/// Arithmetic shared by the jet and scalar evaluators. The scalar implementation reproduces
/// the jet operations on shape `()` exactly (division through `x^{-1}`, `sqrt` as `x^{1/2}`).
trait Value: Sized + Clone {
    type Shape;
    fn constant(shape: &Self::Shape, v: f64) -> Self;
    fn add(&self, o: &Self) -> Result<Self>;
    fn sub(&self, o: &Self) -> Result<Self>;
    fn mul(&self, o: &Self) -> Result<Self>;
    fn recip(&self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn call(&self, f: Func) -> Result<Self>;
}

impl Value for JetScalar {
    type Shape = Arc<JetShape>;
    fn constant(shape: &Arc<JetShape>, v: f64) -> Self {
        JetScalar::constant(shape, v)
    }
    fn add(&self, o: &Self) -> Result<Self> {
        self.try_add(o)
    }
    fn sub(&self, o: &Self) -> Result<Self> {
        self.try_sub(o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        self.try_mul(o)
    }
    fn recip(&self) -> Result<Self> {
        JetScalar::recip(self)
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn call(&self, f: Func) -> Result<Self> {
        Ok(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Log => self.ln()?,
            Func::Sqrt => self.sqrt()?,
            Func::Atan => self.atan(),
        })
    }
}

impl Value for f64 {
    type Shape = ();
    fn constant(_: &(), v: f64) -> Self {
        v
    }
    fn add(&self, o: &Self) -> Result<Self> {
        Ok(self + o)
    }
    fn sub(&self, o: &Self) -> Result<Self> {
        Ok(self - o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Ok(self * o)
    }
    fn recip(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::Singularity("division by zero".into()));
        }
        Ok(self.powi(-1))
    }
    fn neg(&self) -> Self {
        self * -1.0
    }
    fn call(&self, f: Func) -> Result<Self> {
        let x = *self;
        Ok(match f {
            Func::Sin => x.sin_cos().0,
            Func::Cos => x.sin_cos().1,
            Func::Exp => x.exp(),
            Func::Log => {
                if !(x > 0.0) {
                    return Err(Error::Singularity(format!("log of non-positive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(Error::Singularity(format!("non-integer power 0.5 of value {x}")));
                }
                x.powf(0.5)
            }
            Func::Atan => x.atan(),
        })
    }
}

struct Env<'a, T: Value> {
    coords: &'a [Vec<T>],
    time: Option<&'a T>,
    shape: T::Shape,
}

fn at(pos: SourcePos) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ Error::Eval { .. } => e,
        e => Error::Eval {
            pos,
            source: Box::new(e),
        },
    }
}

/// `Some(n)` when `e` is an integer literal (possibly negated) small enough to expand.
fn literal_integer(e: &Expr) -> Option<i64> {
    match &e.node {
        Node::Num(v) if v.fract() == 0.0 && v.abs() <= MAX_LITERAL_POWER as f64 => Some(*v as i64),
        Node::Neg(inner) => literal_integer(inner).map(|n| -n),
        _ => None,
    }
}

fn eval<T: Value>(e: &Expr, env: &Env<'_, T>) -> Result<T> {
    let wrap = at(e.pos);
    match &e.node {
        Node::Num(v) => Ok(T::constant(&env.shape, *v)),
        Node::Var(Var::Time) => env.time.cloned().ok_or_else(|| {
            wrap(Error::InvalidArgument("`t` is not bound".into()))
        }),
        Node::Var(Var::Coord { index, order }) => env
            .coords
            .get(*index)
            .and_then(|row| row.get(*order))
            .cloned()
            .ok_or_else(|| {
                wrap(Error::InvalidArgument(format!(
                    "x{index} of order {order} is not bound"
                )))
            }),
        Node::Neg(a) => Ok(eval(a, env)?.neg()),
        Node::Call(f, a) => eval(a, env)?.call(*f).map_err(wrap),
        Node::Bin(op, a, b) => {
            let x = eval(a, env)?;
            if *op == BinOp::Pow {
                if let Some(n) = literal_integer(b) {
                    return integer_power(&x, n, &env.shape).map_err(wrap);
                }
                let y = eval(b, env)?;
                return x
                    .call(Func::Log)
                    .and_then(|l| y.mul(&l))
                    .and_then(|p| p.call(Func::Exp))
                    .map_err(wrap);
            }
            let y = eval(b, env)?;
            match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                _ => y.recip().and_then(|r| x.mul(&r)),
            }
            .map_err(wrap)
        }
    }
}

fn integer_power<T: Value>(x: &T, n: i64, shape: &T::Shape) -> Result<T> {
    let base = if n < 0 { x.recip()? } else { x.clone() };
    let mut acc = T::constant(shape, 1.0);
    for _ in 0..n.unsigned_abs() {
        acc = acc.mul(&base)?;
    }
    Ok(acc)
}

// ---- adapters ----------------------------------------------------------------------------

/// A Lagrangian given by an expression in `x{a}` and its derivatives.
#[derive(Debug, Clone)]
pub struct ExprLagrangian {
    dim: usize,
    k: usize,
    expr: Expression,
}

impl ExprLagrangian {
    pub fn new(dim: usize, k: usize, expr: Expression) -> Result<Self> {
        let ctx = expr.context();
        if ctx.dim > dim || ctx.max_order > k || ctx.allow_time {
            return Err(Error::InvalidArgument(format!(
                "expression context {ctx:?} does not fit a Lagrangian with dim {dim}, k {k}"
            )));
        }
        Ok(ExprLagrangian { dim, k, expr })
    }

    pub fn parse(source: &str, dim: usize, k: usize) -> Result<Self> {
        ExprLagrangian::new(dim, k, Expression::parse(source, ParseContext::lagrangian(dim, k))?)
    }
}

impl Lagrangian for ExprLagrangian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn order(&self) -> usize {
        self.k
    }
    fn eval(&self, x: &[Vec<JetScalar>]) -> Result<JetScalar> {
        let shape = x
            .first()
            .and_then(|r| r.first())
            .map(|j| j.shape().clone())
            .ok_or_else(|| Error::InvalidArgument("Lagrangian evaluated with no coordinates".into()))?;
        self.expr.evaluate(&shape, x, None)
    }
}

/// A curve `t ↦ (c_0(t), …, c_{dim−1}(t))` given componentwise.
#[derive(Debug, Clone)]
pub struct ExprCurve {
    components: Vec<Expression>,
}

impl ExprCurve {
    pub fn new(components: Vec<Expression>) -> Self {
        ExprCurve { components }
    }

    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        Ok(ExprCurve::new(
            sources
                .iter()
                .map(|s| Expression::parse(s.as_ref(), ParseContext::curve()))
                .collect::<Result<_>>()?,
        ))
    }
}

impl CurveEvaluator for ExprCurve {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>> {
        self.components
            .iter()
            .map(|c| c.evaluate(t.shape(), &[], Some(t)))
            .collect()
    }
}

/// A metric given by a matrix of expressions in the base coordinates.
#[derive(Debug, Clone)]
pub struct ExprMetric {
    entries: Vec<Vec<Expression>>,
}

impl ExprMetric {
    pub fn new(entries: Vec<Vec<Expression>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("metric must be a non-empty square matrix".into()));
        }
        Ok(ExprMetric { entries })
    }

    pub fn parse<S: AsRef<str>>(sources: &[Vec<S>]) -> Result<Self> {
        let n = sources.len();
        ExprMetric::new(
            sources
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|s| Expression::parse(s.as_ref(), ParseContext::metric(n)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
        )
    }
}

impl MetricField for ExprMetric {
    fn dim(&self) -> usize {
        self.entries.len()
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix> {
        let shape = x
            .first()
            .map(|j| j.shape().clone())
            .unwrap_or_else(JetShape::scalar);
        let coords: Vec<Vec<JetScalar>> = x.iter().map(|j| vec![j.clone()]).collect();
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.evaluate(&shape, &coords, None))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parse(s: &str, ctx: ParseContext) -> Expression {
        Expression::parse(s, ctx).unwrap()
    }

    fn kind(r: Result<Expression>) -> ParseErrorKind {
        match r {
            Err(Error::Parse { kind, .. }) => kind,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_documented_examples() {
        let h = parse("0.5*(x0'^2 - x0^2)", ParseContext::lagrangian(1, 1));
        assert_eq!(h.to_string(), "0.5 * (x0'^2 - x0^2)");
        let c = parse("x0''^2 + x1''^2", ParseContext::lagrangian(2, 2));
        assert_eq!(c.to_string(), "x0''^2 + x1''^2");
        assert_eq!(
            kind(Expression::parse("x0'''", ParseContext::lagrangian(1, 2))),
            ParseErrorKind::OrderOverflow
        );
        assert_eq!(
            kind(Expression::parse("x0'3", ParseContext::lagrangian(1, 2))),
            ParseErrorKind::OrderOverflow
        );
    }

    #[test]
    fn precedence() {
        let ctx = ParseContext::lagrangian(3, 0);
        assert_eq!(parse("x0+x1*x2", ctx), parse("x0+(x1*x2)", ctx));
        assert_eq!(parse("x0^x1^x2", ctx), parse("x0^(x1^x2)", ctx));
        assert_eq!(parse("-x0^2", ctx), parse("-(x0^2)", ctx));
        assert_ne!(parse("-x0^2", ctx), parse("(-x0)^2", ctx));
        assert_eq!(parse("x0-x1-x2", ctx), parse("(x0-x1)-x2", ctx));
        assert_eq!(parse("x0^-x1", ctx).to_string(), "x0^-x1");
        assert_eq!(parse("x0-(x1-x2)", ctx).to_string(), "x0 - (x1 - x2)");
        assert_eq!(parse("(-x0)^2", ctx).to_string(), "(-x0)^2");
    }

    #[test]
    fn errors_carry_positions() {
        let ctx = ParseContext::lagrangian(1, 1);
        match Expression::parse("x0 +\n  * 2", ctx) {
            Err(Error::Parse { kind, pos, .. }) => {
                assert_eq!(kind, ParseErrorKind::Syntax);
                assert_eq!((pos.line, pos.column), (2, 3));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(kind(Expression::parse("y + 1", ctx)), ParseErrorKind::UnknownIdentifier);
        assert_eq!(kind(Expression::parse("x1", ctx)), ParseErrorKind::UnknownIdentifier);
        assert_eq!(kind(Expression::parse("t", ctx)), ParseErrorKind::UnknownIdentifier);
        assert_eq!(kind(Expression::parse("sin(x0", ctx)), ParseErrorKind::Syntax);
        assert_eq!(kind(Expression::parse("x0 x0", ctx)), ParseErrorKind::Syntax);
        assert!(Expression::parse("sin(t) + pi", ParseContext::curve()).is_ok());
    }

    #[test]
    fn square_of_seeded_value() {
        let s = JetShape::new(&[1]).unwrap();
        let x = JetScalar::from_coeffs(&s, vec![3.0, 1.0]).unwrap();
        let e = parse("x0^2", ParseContext::metric(1));
        let v = e.evaluate(&s, &[vec![x]], None).unwrap();
        assert_eq!(v.coeffs(), &[9.0, 6.0]);
    }

    #[test]
    fn sine_maclaurin() {
        let s = JetShape::new(&[4]).unwrap();
        let t = JetScalar::seed(&s, 0.0, 0).unwrap();
        let v = parse("sin(t)", ParseContext::curve())
            .evaluate(&s, &[], Some(&t))
            .unwrap();
        let want = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (a, b) in v.coeffs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_expression_is_constant_jet() {
        let s = JetShape::new(&[2, 1]).unwrap();
        let e = parse("2*pi - exp(0)", ParseContext::curve());
        assert!(e.is_constant());
        let v = e.evaluate(&s, &[], None).unwrap();
        assert_eq!(v.value(), 2.0 * PI - 1.0);
        assert!(v.coeffs()[1..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn domain_errors_point_at_the_call() {
        let e = parse("1 + log(x0)", ParseContext::metric(1));
        match e.evaluate_scalar(&[vec![-1.0]], None) {
            Err(Error::Eval { pos, .. }) => assert_eq!(pos.column, 5),
            other => panic!("{other:?}"),
        }
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
        let leaf = depth == 0 || rng.gen_bool(0.25);
        let node = if leaf {
            match rng.gen_range(0..3) {
                0 => Node::Num(rng.gen_range(0..1000) as f64 / 8.0),
                1 => Node::Var(Var::Coord {
                    index: rng.gen_range(0..2),
                    order: rng.gen_range(0..4),
                }),
                _ => Node::Var(Var::Time),
            }
        } else {
            match rng.gen_range(0..7) {
                0 => Node::Neg(Box::new(random_expr(rng, depth - 1))),
                1 => Node::Call(
                    Func::ALL[rng.gen_range(0..6)],
                    Box::new(random_expr(rng, depth - 1)),
                ),
                n => {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][n - 2];
                    Node::Bin(
                        op,
                        Box::new(random_expr(rng, depth - 1)),
                        Box::new(random_expr(rng, depth - 1)),
                    )
                }
            }
        };
        Expr::new(node)
    }

    #[test]
    fn print_parse_round_trip() {
        let ctx = ParseContext {
            dim: 2,
            max_order: 3,
            allow_time: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let tree = Expression::from_tree(random_expr(&mut rng, 5), ctx).unwrap();
            let once = parse(&tree.to_string(), ctx);
            assert_eq!(once, tree, "{tree}");
            let twice = parse(&once.to_string(), ctx);
            assert_eq!(twice, once);
        }
    }

    #[test]
    fn scalar_and_rank_zero_jets_agree_exactly() {
        let ctx = ParseContext {
            dim: 2,
            max_order: 3,
            allow_time: true,
        };
        let shape = JetShape::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut compared = 0;
        for _ in 0..300 {
            let e = Expression::from_tree(random_expr(&mut rng, 4), ctx).unwrap();
            let xs: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.gen_range(0.1..2.0)).collect())
                .collect();
            let t = rng.gen_range(0.1..2.0);
            let jets: Vec<Vec<JetScalar>> = xs
                .iter()
                .map(|r| r.iter().map(|&v| JetScalar::scalar(v)).collect())
                .collect();
            let a = e.evaluate_scalar(&xs, Some(t));
            let b = e.evaluate(&shape, &jets, Some(&JetScalar::scalar(t)));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    assert!(a.to_bits() == b.value().to_bits() || (a.is_nan() && b.value().is_nan()), "{e}: {a} vs {}", b.value());
                    compared += 1;
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{e}: {a:?} vs {b:?}"),
            }
        }
        assert!(compared > 150);
    }
}
