//! Numerical checks of divergence-based stability conditions for
//! nonautonomous systems ẋ = f(x, t).
//!
//! The crate parses expressions for the vector field and a candidate
//! certificate S(x, t), differentiates them by forward-mode AD, and
//! evaluates sufficient conditions pointwise over a sampled domain,
//! integral necessary conditions by Monte Carlo, and linear matrix
//! inequalities by a Jacobi eigensolver. An adaptive ODE integrator
//! cross-checks verdicts against simulated trajectories.
//!
//! Every verdict is sampled evidence, not a proof.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod conditions;
pub mod expr;
pub mod fields;
pub mod integrals;
pub mod linalg;
pub mod ode;
pub mod params;
pub mod config;
pub mod report;
pub mod run;
pub mod scenarios;
