//! Forward-mode automatic differentiation.
//!
//! [`Dual`] carries one directional derivative, [`HyperDual`] carries two
//! first-order directions and their mixed second derivative. Every elementary
//! operation is lifted through
//!
//! ```text
//! f(a + b e1 + c e2 + d e1e2) = f(a) + f'(a) b e1 + f'(a) c e2 + (f'(a) d + f''(a) b c) e1e2
//! ```
//!
//! The first-order parts of both carriers use identical formulas, so a
//! hyper-dual sweep reproduces the dual sweep in its `d1` slot.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::expr::{EvalError, Expr};

/// Number type an [`Expr`] can be evaluated over.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// Highest derivative order carried.
    const ORDER: u8;
    fn from_f64(c: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    /// Derivative taken as 0 at the kink.
    fn abs(self) -> Self;
    fn powf(self, c: f64) -> Self;
}

fn pow_value(u: f64, c: f64) -> f64 {
    if c.fract() == 0.0 && c.abs() < 1024.0 {
        u.powi(c as i32)
    } else {
        u.powf(c)
    }
}

/// `sign(u)` with `sign(0) = 0`.
fn sign0(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Scalar for f64 {
    const ORDER: u8 = 0;
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powf(self, c: f64) -> Self {
        pow_value(self, c)
    }
}

/// `value + deriv·ε`, `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        Dual { value: f, deriv: df * self.deriv }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.value / o.value;
        Dual::new(q, (self.deriv - q * o.deriv) / o.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

impl Scalar for Dual {
    const ORDER: u8 = 1;
    fn from_f64(c: f64) -> Self {
        Dual::new(c, 0.0)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn tanh(self) -> Self {
        let th = self.value.tanh();
        self.chain(th, 1.0 - th * th)
    }
    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r)
    }
    fn abs(self) -> Self {
        self.chain(self.value.abs(), sign0(self.value))
    }
    fn powf(self, c: f64) -> Self {
        let df = if c == 0.0 { 0.0 } else { c * pow_value(self.value, c - 1.0) };
        self.chain(pow_value(self.value, c), df)
    }
}

/// `value + d1·ε1 + d2·ε2 + d12·ε1ε2`, `ε1² = ε2² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        HyperDual { value, d1, d2, d12 }
    }

    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        HyperDual {
            value: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + ddf * self.d1 * self.d2,
        }
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    fn add(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    fn sub(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + self.value * o.d2,
            self.d12 * o.value + self.d1 * o.d2 + self.d2 * o.d1 + self.value * o.d12,
        )
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    fn div(self, o: HyperDual) -> HyperDual {
        // a = q·b differentiated term by term
        let q = self.value / o.value;
        let q1 = (self.d1 - q * o.d1) / o.value;
        let q2 = (self.d2 - q * o.d2) / o.value;
        let q12 = (self.d12 - q1 * o.d2 - q2 * o.d1 - q * o.d12) / o.value;
        HyperDual::new(q, q1, q2, q12)
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    fn neg(self) -> HyperDual {
        HyperDual::new(-self.value, -self.d1, -self.d2, -self.d12)
    }
}

impl Scalar for HyperDual {
    const ORDER: u8 = 2;
    fn from_f64(c: f64) -> Self {
        HyperDual::new(c, 0.0, 0.0, 0.0)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn tanh(self) -> Self {
        let th = self.value.tanh();
        let d = 1.0 - th * th;
        self.chain(th, d, -2.0 * th * d)
    }
    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }
    fn abs(self) -> Self {
        self.chain(self.value.abs(), sign0(self.value), 0.0)
    }
    fn powf(self, c: f64) -> Self {
        let u = self.value;
        let df = if c == 0.0 { 0.0 } else { c * pow_value(u, c - 1.0) };
        let ddf = if c == 0.0 || c == 1.0 { 0.0 } else { c * (c - 1.0) * pow_value(u, c - 2.0) };
        self.chain(pow_value(u, c), df, ddf)
    }
}

/// Seed direction in `(x, t)` space.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub dt: f64,
}

impl Direction {
    /// Unit vector along `x_{axis+1}` (0-based `axis`).
    pub fn axis(dimension: usize, axis: usize) -> Self {
        let mut dx = vec![0.0; dimension];
        dx[axis] = 1.0;
        Direction { dx, dt: 0.0 }
    }

    pub fn time(dimension: usize) -> Self {
        Direction { dx: vec![0.0; dimension], dt: 1.0 }
    }

    pub fn zero(dimension: usize) -> Self {
        Direction { dx: vec![0.0; dimension], dt: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEval {
    pub value: f64,
    pub deriv: f64,
    /// `abs` was differentiated at exactly zero.
    pub kink: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDualEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
    pub kink: bool,
}

/// Value and directional derivative of `e` at `(x, t)` along `dir`.
pub fn eval_dual(e: &Expr, x: &[f64], t: f64, dir: &Direction) -> Result<DualEval, EvalError> {
    assert_eq!(x.len(), dir.dx.len(), "seed length must match the state");
    let xs: Vec<Dual> = x.iter().zip(&dir.dx).map(|(&v, &d)| Dual::new(v, d)).collect();
    let mut kink = false;
    let r = e.eval_with(&xs, Dual::new(t, dir.dt), &mut kink)?;
    Ok(DualEval { value: r.value, deriv: r.deriv, kink })
}

/// Value, both directional derivatives and the mixed second derivative.
pub fn eval_hyperdual(
    e: &Expr,
    x: &[f64],
    t: f64,
    dir1: &Direction,
    dir2: &Direction,
) -> Result<HyperDualEval, EvalError> {
    assert_eq!(x.len(), dir1.dx.len(), "seed length must match the state");
    assert_eq!(x.len(), dir2.dx.len(), "seed length must match the state");
    let xs: Vec<HyperDual> = x
        .iter()
        .zip(dir1.dx.iter().zip(&dir2.dx))
        .map(|(&v, (&a, &b))| HyperDual::new(v, a, b, 0.0))
        .collect();
    let mut kink = false;
    let r = e.eval_with(&xs, HyperDual::new(t, dir1.dt, dir2.dt, 0.0), &mut kink)?;
    Ok(HyperDualEval { value: r.value, d1: r.d1, d2: r.d2, d12: r.d12, kink })
}
