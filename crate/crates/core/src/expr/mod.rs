//! Scalar expressions over the state variables `x1..xn` and time `t`.
//!
//! Expressions are immutable trees. They are produced by [`parse`] (or the
//! arithmetic operator impls) and evaluated over any carrier implementing
//! [`Scalar`](crate::autodiff::Scalar): plain `f64`, [`Dual`](crate::autodiff::Dual)
//! or [`HyperDual`](crate::autodiff::HyperDual).
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = ("-" | "+") unary | power ;
//! power    = primary [ "^" exponent ] ;
//! exponent = ("-" | "+") exponent | power ;      (* must fold to a constant *)
//! primary  = number | "t" | "x" index | func "(" expr ")" | "(" expr ")" ;
//! func     = "sin" | "cos" | "exp" | "sqrt" | "abs" | "tanh" ;
//! number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!          | "." digits [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `^` binds tighter than unary minus (`-x1^2` is `-(x1^2)`) and is
//! right-associative (`2^3^2` is `2^9`).

mod eval;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use eval::{EvalError, EvalErrorKind};
pub use parse::{parse, ParseDiagnostics, ParseErrorKind};

/// Single-argument operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Tanh,
}

impl UnaryOp {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree.
///
/// `Pow` keeps its exponent as a plain number: non-constant exponents are
/// not representable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// State variable, 1-based (`Var(1)` is `x1`).
    Var(usize),
    Time,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    /// `x_index`, 1-based.
    pub fn var(index: usize) -> Self {
        assert!(index >= 1, "state variables are 1-based");
        Expr::Var(index)
    }

    pub fn time() -> Self {
        Expr::Time
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn powf(self, exponent: f64) -> Self {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn sin(self) -> Self {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Self {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Self {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn sqrt(self) -> Self {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn abs(self) -> Self {
        Expr::unary(UnaryOp::Abs, self)
    }

    pub fn tanh(self) -> Self {
        Expr::unary(UnaryOp::Tanh, self)
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Largest state-variable index referenced, 0 if none.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Time => 0,
            Expr::Var(i) => *i,
            Expr::Unary(_, c) | Expr::Pow(c, _) => c.max_var(),
            Expr::Binary(_, l, r) => l.max_var().max(r.max_var()),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Time => true,
            Expr::Unary(_, c) | Expr::Pow(c, _) => c.depends_on_time(),
            Expr::Binary(_, l, r) => l.depends_on_time() || r.depends_on_time(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(_, c) | Expr::Pow(c, _) => 1 + c.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(_, c) | Expr::Pow(c, _) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Fully parenthesised text that [`parse`] maps back to an equivalent tree.
    pub fn print(&self) -> String {
        self.to_string()
    }
}

/// Shortest round-trip decimal form; exponent notation for extreme magnitudes.
pub(crate) fn format_number(c: f64) -> String {
    let a = c.abs();
    let body = if a != 0.0 && !(1e-6..1e16).contains(&a) {
        format!("{a:e}")
    } else {
        format!("{a}")
    };
    if c.is_sign_negative() && c != 0.0 {
        format!("(-{body})")
    } else {
        body
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => f.write_str(&format_number(*c)),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Time => f.write_str("t"),
            Expr::Unary(UnaryOp::Neg, c) => write!(f, "(-{c})"),
            Expr::Unary(op, c) => write!(f, "{}({c})", op.name()),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Pow(b, e) => write!(f, "({b} ^ {})", format_number(*e)),
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}
