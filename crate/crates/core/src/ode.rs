//! Explicit Runge–Kutta integration of ẋ = f(x, t) and empirical
//! convergence classification of the resulting trajectories.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::EvalError;
use crate::fields::VectorField;

pub const DEFAULT_EPS_CONV: f64 = 1e-3;
pub const DIVERGENCE_NORM: f64 = 1e9;
/// Trailing share of the time span a converged trajectory must stay close.
pub const DEFAULT_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    Rk4 { h: f64 },
    Rkf45 { rtol: f64, atol: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Rk4 { h } => format!("rk4(h={h})"),
            Method::Rkf45 { rtol, atol } => format!("rkf45(rtol={rtol}, atol={atol})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTf,
    ConvergedEarly,
    Diverged,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    InvalidInput(String),
    Eval { t: f64, source: EvalError },
    MaxSteps(usize),
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::InvalidInput(m) => write!(f, "invalid input: {m}"),
            OdeError::Eval { t, source } => write!(f, "field evaluation failed at t = {t}: {source}"),
            OdeError::MaxSteps(n) => write!(f, "step limit of {n} reached"),
        }
    }
}

impl std::error::Error for OdeError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub method: Method,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub max_steps: usize,
    /// Stop once ‖x‖ falls below this (typically ε_conv / 10).
    pub early_stop_norm: Option<f64>,
    pub divergence_norm: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            max_steps: 2_000_000,
            early_stop_norm: Some(DEFAULT_EPS_CONV / 10.0),
            divergence_norm: DIVERGENCE_NORM,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Rhs<'a> {
    f: &'a VectorField,
}

impl Rhs<'_> {
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        self.f.eval_into(x, t, out).map_err(|source| OdeError::Eval { t, source })
    }
}

// Fehlberg 4(5) tableau
const C: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

fn rk4_step(rhs: &Rhs, x: &[f64], t: f64, h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64], out: &mut [f64]) -> Result<(), OdeError> {
    let n = x.len();
    rhs.eval(x, t, &mut k[0])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[0][i];
    }
    rhs.eval(tmp, t + 0.5 * h, &mut k[1])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[1][i];
    }
    rhs.eval(tmp, t + 0.5 * h, &mut k[2])?;
    for i in 0..n {
        tmp[i] = x[i] + h * k[2][i];
    }
    rhs.eval(tmp, t + h, &mut k[3])?;
    for i in 0..n {
        out[i] = x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(())
}

/// Starting step from the scaled sizes of x0 and f(x0): 1 % of the time it
/// takes f to move x by its own size.
fn initial_step(rhs: &Rhs, x: &[f64], t: f64, rtol: f64, atol: f64, f0: &mut [f64]) -> Result<f64, OdeError> {
    rhs.eval(x, t, f0)?;
    let n = x.len().max(1) as f64;
    let rms = |v: &[f64]| (v.iter().zip(x).map(|(a, xi)| (a / (atol + rtol * xi.abs())).powi(2)).sum::<f64>() / n).sqrt();
    let (d0, d1) = (rms(x), rms(f0));
    Ok(if d0 < 1e-5 || d1 < 1e-5 || !d1.is_finite() { 1e-6 } else { 0.01 * d0 / d1 })
}

/// Integrate from `x0` at `t0` to `tf`.
///
/// Every accepted step is recorded. Integration stops early when the state
/// norm drops below `early_stop_norm`, exceeds `divergence_norm` or turns
/// non-finite, or when the adaptive step underflows 1e-12·(tf − t0).
pub fn integrate(
    f: &VectorField,
    x0: &[f64],
    t0: f64,
    tf: f64,
    method: Method,
    opts: &IntegrateOptions,
) -> Result<Trajectory, OdeError> {
    let n = f.dimension();
    if x0.len() != n {
        return Err(OdeError::InvalidInput(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(OdeError::InvalidInput(format!("need t0 < tf, got [{t0}, {tf}]")));
    }
    match method {
        Method::Rk4 { h } if !(h > 0.0) => return Err(OdeError::InvalidInput("step h must be positive".into())),
        Method::Rkf45 { rtol, atol } if !(rtol > 0.0 || atol > 0.0) || rtol < 0.0 || atol < 0.0 => {
            return Err(OdeError::InvalidInput("tolerances must be non-negative and not both zero".into()))
        }
        _ => {}
    }
    let rhs = Rhs { f };
    let mut times = vec![t0];
    let mut states = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    let mut t = t0;
    let span = tf - t0;
    let stop = |x: &[f64]| -> Option<Termination> {
        let r = norm(x);
        if !r.is_finite() || r > opts.divergence_norm {
            Some(Termination::Diverged)
        } else if opts.early_stop_norm.is_some_and(|e| r < e) {
            Some(Termination::ConvergedEarly)
        } else {
            None
        }
    };
    if let Some(term) = stop(&x) {
        return Ok(Trajectory { times, states, method, termination: term });
    }
    let mut steps = 0usize;
    let mut next = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    match method {
        Method::Rk4 { h } => {
            let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
            let count = (span / h).ceil() as usize;
            if count > opts.max_steps {
                return Err(OdeError::MaxSteps(opts.max_steps));
            }
            for s in 0..count {
                let t_next = if s + 1 == count { tf } else { t0 + (s + 1) as f64 * h };
                rk4_step(&rhs, &x, t, t_next - t, &mut k, &mut tmp, &mut next)?;
                std::mem::swap(&mut x, &mut next);
                t = t_next;
                times.push(t);
                states.push(x.clone());
                if let Some(term) = stop(&x) {
                    return Ok(Trajectory { times, states, method, termination: term });
                }
            }
        }
        Method::Rkf45 { rtol, atol } => {
            let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
            let mut y4 = vec![0.0; n];
            let h_min = 1e-12 * span;
            let mut h = initial_step(&rhs, &x, t0, rtol, atol, &mut next)?.clamp(h_min, span);
            while t < tf {
                if steps == opts.max_steps {
                    return Err(OdeError::MaxSteps(opts.max_steps));
                }
                steps += 1;
                let last = t + h >= tf;
                let hs = if last { tf - t } else { h };
                for st in 0..6 {
                    for i in 0..n {
                        tmp[i] = x[i] + hs * (0..st).map(|j| A[st][j] * k[j][i]).sum::<f64>();
                    }
                    let (head, tail) = k.split_at_mut(st);
                    let _ = head;
                    rhs.eval(&tmp, t + C[st] * hs, &mut tail[0])?;
                }
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let (mut s4, mut s5) = (0.0, 0.0);
                    for st in 0..6 {
                        s4 += B4[st] * k[st][i];
                        s5 += B5[st] * k[st][i];
                    }
                    y4[i] = x[i] + hs * s4;
                    next[i] = x[i] + hs * s5;
                    let sc = atol + rtol * x[i].abs().max(next[i].abs());
                    let e = (next[i] - y4[i]).abs() / sc;
                    // f64::max would drop a NaN
                    err = if e.is_nan() { f64::INFINITY } else { err.max(e) };
                }
                if !err.is_finite() || next.iter().any(|v| !v.is_finite()) {
                    err = f64::INFINITY;
                }
                if err <= 1.0 {
                    t = if last { tf } else { t + hs };
                    std::mem::swap(&mut x, &mut next);
                    times.push(t);
                    states.push(x.clone());
                    if let Some(term) = stop(&x) {
                        return Ok(Trajectory { times, states, method, termination: term });
                    }
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = hs * factor;
                if h < h_min {
                    return Ok(Trajectory { times, states, method, termination: Termination::StepUnderflow });
                }
            }
        }
    }
    Ok(Trajectory { times, states, method, termination: Termination::ReachedTf })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ConvergenceClass {
    Converged { target: Vec<f64> },
    BoundedNonconvergent,
    Diverged,
}

impl ConvergenceClass {
    pub fn label(&self) -> &'static str {
        match self {
            ConvergenceClass::Converged { .. } => "converged",
            ConvergenceClass::BoundedNonconvergent => "bounded_nonconvergent",
            ConvergenceClass::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub class: ConvergenceClass,
    pub final_norm: f64,
    pub final_distance: f64,
    /// Time of the last state.
    pub time: f64,
}

/// Converged if every state in the trailing `window` share of the span lies
/// within `eps_conv` of `target`; diverged past [`DIVERGENCE_NORM`].
pub fn classify(traj: &Trajectory, target: &[f64], eps_conv: f64, window: f64) -> ConvergenceVerdict {
    let last = traj.final_state();
    let dist = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let final_norm = norm(last);
    let final_distance = dist(last);
    let time = *traj.times.last().unwrap_or(&f64::NAN);
    let origin = target.iter().all(|v| *v == 0.0);
    let class = if traj.termination == Termination::Diverged || !final_norm.is_finite() || final_norm > DIVERGENCE_NORM {
        ConvergenceClass::Diverged
    } else if traj.termination == Termination::ConvergedEarly && origin {
        ConvergenceClass::Converged { target: target.to_vec() }
    } else {
        let t0 = traj.times[0];
        let from = time - window * (time - t0);
        let close = traj
            .times
            .iter()
            .zip(&traj.states)
            .filter(|(t, _)| **t >= from)
            .all(|(_, x)| dist(x) < eps_conv);
        if close {
            ConvergenceClass::Converged { target: target.to_vec() }
        } else {
            ConvergenceClass::BoundedNonconvergent
        }
    };
    ConvergenceVerdict { class, final_norm, final_distance, time }
}

/// Tensor grid of initial states: per axis `(lo, hi, count)`.
pub fn grid_points(axes: &[(f64, f64, usize)]) -> Vec<Vec<f64>> {
    let values: Vec<Vec<f64>> = axes.iter().map(|&(lo, hi, c)| crate::conditions::linspace(lo, hi, c)).collect();
    if values.is_empty() || values.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for axis in &values {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub t0: f64,
    pub tf: f64,
    pub method: Method,
    pub options: IntegrateOptions,
    pub target: Vec<f64>,
    pub eps_conv: f64,
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub x0: Vec<f64>,
    pub trajectory: Trajectory,
    pub verdict: ConvergenceVerdict,
}

/// Integrate and classify every initial state, in parallel, in input order.
pub fn sweep(f: &VectorField, initial: &[Vec<f64>], settings: &SweepSettings) -> Result<Vec<SweepResult>, OdeError> {
    initial
        .par_iter()
        .map(|x0| {
            let trajectory = integrate(f, x0, settings.t0, settings.tf, settings.method, &settings.options)?;
            let verdict = classify(&trajectory, &settings.target, settings.eps_conv, settings.window);
            Ok(SweepResult { x0: x0.clone(), trajectory, verdict })
        })
        .collect()
}
