//! Generic evaluation over any [`Scalar`] carrier.

use std::fmt;

use super::{BinaryOp, Expr, UnaryOp};
use crate::autodiff::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    SqrtOfNegative,
    /// Negative base with a non-integer exponent, or zero base with a negative one.
    InvalidPower,
    /// The value exists but the requested derivative does not (e.g. `sqrt` at 0).
    NotDifferentiable,
    VariableOutOfRange,
}

/// Domain error with the offending node's pre-order index and its text.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub node: usize,
    pub subexpression: String,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::SqrtOfNegative => "sqrt of a negative value",
            EvalErrorKind::InvalidPower => "power outside its real domain",
            EvalErrorKind::NotDifferentiable => "derivative undefined",
            EvalErrorKind::VariableOutOfRange => "variable outside the supplied state",
        };
        write!(f, "{what} in `{}` (node {})", self.subexpression, self.node)
    }
}

impl std::error::Error for EvalError {}

struct Fault<'a> {
    kind: EvalErrorKind,
    node: usize,
    at: &'a Expr,
}

fn is_integer(c: f64) -> bool {
    c.fract() == 0.0
}

fn go<'a, T: Scalar>(
    e: &'a Expr,
    x: &[T],
    t: T,
    kink: &mut bool,
    next: &mut usize,
) -> Result<T, Fault<'a>> {
    let id = *next;
    *next += 1;
    let fault = |kind| Fault { kind, node: id, at: e };
    Ok(match e {
        Expr::Const(c) => T::from_f64(*c),
        Expr::Var(i) => *x.get(i.wrapping_sub(1)).ok_or_else(|| fault(EvalErrorKind::VariableOutOfRange))?,
        Expr::Time => t,
        Expr::Unary(op, c) => {
            let u = go(c, x, t, kink, next)?;
            match op {
                UnaryOp::Neg => -u,
                UnaryOp::Sin => u.sin(),
                UnaryOp::Cos => u.cos(),
                UnaryOp::Exp => u.exp(),
                UnaryOp::Tanh => u.tanh(),
                UnaryOp::Sqrt => {
                    let v = u.value();
                    if v < 0.0 {
                        return Err(fault(EvalErrorKind::SqrtOfNegative));
                    }
                    if v == 0.0 && T::ORDER > 0 {
                        return Err(fault(EvalErrorKind::NotDifferentiable));
                    }
                    u.sqrt()
                }
                UnaryOp::Abs => {
                    if u.value() == 0.0 && T::ORDER > 0 {
                        *kink = true;
                    }
                    u.abs()
                }
            }
        }
        Expr::Binary(op, l, r) => {
            let a = go(l, x, t, kink, next)?;
            let b = go(r, x, t, kink, next)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b.value() == 0.0 {
                        return Err(fault(EvalErrorKind::DivisionByZero));
                    }
                    a / b
                }
            }
        }
        Expr::Pow(b, c) => {
            let u = go(b, x, t, kink, next)?;
            let v = u.value();
            let c = *c;
            if v < 0.0 && !is_integer(c) {
                return Err(fault(EvalErrorKind::InvalidPower));
            }
            if v == 0.0 {
                if c < 0.0 {
                    return Err(fault(EvalErrorKind::InvalidPower));
                }
                // u^c has k derivatives at 0 only if c is an integer or c >= k
                if !is_integer(c) && c < f64::from(T::ORDER) {
                    return Err(fault(EvalErrorKind::NotDifferentiable));
                }
            }
            u.powf(c)
        }
    })
}

impl Expr {
    /// Evaluate at state `x` and time `t`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        let mut kink = false;
        self.eval_with(x, t, &mut kink)
    }

    /// Evaluate over a generic carrier. `kink` is set when `abs` is hit at
    /// exactly zero with a derivative carrier (the one-sided value 0 is used).
    pub fn eval_with<T: Scalar>(&self, x: &[T], t: T, kink: &mut bool) -> Result<T, EvalError> {
        let mut next = 0;
        go(self, x, t, kink, &mut next).map_err(|f| EvalError {
            kind: f.kind,
            node: f.node,
            subexpression: f.at.print(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn evaluates_with_time() {
        let e = parse("x1*x2 + sin(t)", 2).unwrap();
        let v = e.eval(&[2.0, 3.0], std::f64::consts::FRAC_PI_2).unwrap();
        assert!((v - 7.0).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_reports_node() {
        let e = parse("1/x1", 1).unwrap();
        let err = e.eval(&[0.0], 0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.node, 0);
        assert_eq!(err.subexpression, "(1 / x1)");
        let nested = parse("x1 + 1/(x1-1)", 1).unwrap();
        let err = nested.eval(&[1.0], 0.0).unwrap_err();
        assert_eq!(err.node, 2);
    }

    #[test]
    fn real_domain_rules() {
        let e = |s: &str, x: f64| parse(s, 1).unwrap().eval(&[x], 0.0);
        assert_eq!(e("sqrt(x1)", -1.0).unwrap_err().kind, EvalErrorKind::SqrtOfNegative);
        assert_eq!(e("sqrt(x1)", 0.0).unwrap(), 0.0);
        assert_eq!(e("x1^0.5", -1.0).unwrap_err().kind, EvalErrorKind::InvalidPower);
        assert_eq!(e("x1^3", -2.0).unwrap(), -8.0);
        assert_eq!(e("x1^-1", 0.0).unwrap_err().kind, EvalErrorKind::InvalidPower);
        assert_eq!(e("x1^0.5", 0.0).unwrap(), 0.0);
        assert_eq!(e("abs(x1)", -3.0).unwrap(), 3.0);
    }

    #[test]
    fn out_of_range_variable() {
        let e = parse("x2", 2).unwrap();
        assert_eq!(e.eval(&[1.0], 0.0).unwrap_err().kind, EvalErrorKind::VariableOutOfRange);
    }
}
