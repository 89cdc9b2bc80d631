//! Scalar and vector fields built from expressions, and the composite
//! quantities the stability conditions are stated in.

use std::fmt;

use crate::autodiff::{Dual, HyperDual, Scalar};
use crate::expr::{parse, EvalError, Expr, ParseDiagnostics};

/// Gradients with norm below this are treated as stationary.
pub const KINK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldError {
    Parse { what: String, source: ParseDiagnostics },
    Eval(EvalError),
    Dimension(String),
    /// S = 0 where S⁻¹ is needed.
    ZeroCertificate,
    /// |∇S| below [`KINK_TOL`] where |∇S| is differentiated.
    Stationary,
    /// `abs` differentiated at its kink.
    Kink,
    NonFinite,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::Parse { what, source } => write!(f, "cannot parse {what}: {source}"),
            FieldError::Eval(e) => write!(f, "evaluation failed: {e}"),
            FieldError::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            FieldError::ZeroCertificate => f.write_str("certificate is zero where its inverse is needed"),
            FieldError::Stationary => f.write_str("certificate gradient vanishes"),
            FieldError::Kink => f.write_str("abs() differentiated at its kink"),
            FieldError::NonFinite => f.write_str("non-finite value"),
        }
    }
}

impl std::error::Error for FieldError {}

impl From<EvalError> for FieldError {
    fn from(e: EvalError) -> Self {
        FieldError::Eval(e)
    }
}

impl FieldError {
    /// Errors that mark a sample as singular rather than the input as broken.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            FieldError::Eval(_) | FieldError::ZeroCertificate | FieldError::Stationary | FieldError::Kink | FieldError::NonFinite
        )
    }
}

fn check_dim(e: &Expr, dimension: usize, what: &str) -> Result<(), FieldError> {
    if e.max_var() > dimension {
        return Err(FieldError::Dimension(format!(
            "{what} uses x{} but the dimension is {dimension}",
            e.max_var()
        )));
    }
    Ok(())
}

fn parse_as(text: &str, dimension: usize, what: &str) -> Result<Expr, FieldError> {
    parse(text, dimension).map_err(|source| FieldError::Parse { what: what.to_string(), source })
}

/// Scalar field S(x, t).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dimension: usize,
    body: Expr,
}

impl ScalarField {
    pub fn new(dimension: usize, body: Expr) -> Result<Self, FieldError> {
        check_dim(&body, dimension, "scalar field")?;
        Ok(ScalarField { dimension, body })
    }

    pub fn parse(text: &str, dimension: usize) -> Result<Self, FieldError> {
        Ok(ScalarField { dimension, body: parse_as(text, dimension, "scalar field")? })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, EvalError> {
        self.body.eval(x, t)
    }
}

/// Vector field f(x, t) with one component per state variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Result<Self, FieldError> {
        let n = components.len();
        for (i, c) in components.iter().enumerate() {
            check_dim(c, n, &format!("component {}", i + 1))?;
        }
        Ok(VectorField { components })
    }

    pub fn parse<S: AsRef<str>>(texts: &[S]) -> Result<Self, FieldError> {
        let n = texts.len();
        let components = texts
            .iter()
            .enumerate()
            .map(|(i, s)| parse_as(s.as_ref(), n, &format!("component {}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorField { components })
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(x, t)).collect()
    }

    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x, t)?;
        }
        Ok(())
    }
}

/// ẋ = ξ(x,t) + g(x,t)·u(x,t).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledSystem {
    drift: VectorField,
    /// n rows of m entries.
    input: Vec<Vec<Expr>>,
    control: Vec<Expr>,
}

impl ControlledSystem {
    pub fn new(drift: VectorField, input: Vec<Vec<Expr>>, control: Vec<Expr>) -> Result<Self, FieldError> {
        let n = drift.dimension();
        let m = control.len();
        if input.len() != n {
            return Err(FieldError::Dimension(format!("input matrix has {} rows, expected {n}", input.len())));
        }
        for (i, row) in input.iter().enumerate() {
            if row.len() != m {
                return Err(FieldError::Dimension(format!(
                    "input matrix row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            for e in row {
                check_dim(e, n, "input matrix")?;
            }
        }
        for e in &control {
            check_dim(e, n, "control")?;
        }
        Ok(ControlledSystem { drift, input, control })
    }

    pub fn dimension(&self) -> usize {
        self.drift.dimension()
    }

    pub fn drift(&self) -> &VectorField {
        &self.drift
    }

    pub fn input(&self) -> &[Vec<Expr>] {
        &self.input
    }

    pub fn control(&self) -> &[Expr] {
        &self.control
    }

    /// Components ξi + Σj gij·uj; zero entries of g are dropped.
    pub fn closed_loop(&self) -> VectorField {
        let components = self
            .drift
            .components()
            .iter()
            .zip(&self.input)
            .map(|(xi, row)| {
                row.iter()
                    .zip(&self.control)
                    .filter(|(g, u)| !g.is_zero_constant() && !u.is_zero_constant())
                    .fold(xi.clone(), |acc, (g, u)| acc + g.clone() * u.clone())
            })
            .collect();
        VectorField { components }
    }
}

/// Weight w in the flux density ∂S/∂t + ∇·(w·f).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// w = S, i.e. μ|∇S| = S.
    SWeight,
    /// w = S⁻¹, i.e. μ|∇S⁻¹| = S⁻¹.
    InvSWeight,
    /// Explicit μ, multiplied by |∇S| (or |∇S⁻¹|).
    ExplicitMu(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxForm {
    /// ∂S/∂t + ∇S·f
    LyapunovRate,
    /// ∂S/∂t + ∇·(S f)
    DivForm,
    /// ∂S⁻¹/∂t + ∇·(S⁻¹ f)
    InvDivForm,
    /// ∂S/∂t + ∇·(μ|∇S| f)
    WeightedNorm,
    /// ∂S⁻¹/∂t + ∇·(μ|∇S⁻¹| f)
    InvWeightedNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub norm: f64,
    pub kink: bool,
}

impl Gradient {
    pub fn is_stationary(&self) -> bool {
        self.norm < KINK_TOL
    }
}

fn dual_state(x: &[f64], axis: Option<usize>) -> Vec<Dual> {
    x.iter()
        .enumerate()
        .map(|(k, &v)| Dual::new(v, if Some(k) == axis { 1.0 } else { 0.0 }))
        .collect()
}

fn check_state(dimension: usize, x: &[f64]) -> Result<(), FieldError> {
    if x.len() != dimension {
        return Err(FieldError::Dimension(format!("state has {} entries, expected {dimension}", x.len())));
    }
    Ok(())
}

/// ∇S by one dual sweep per axis.
pub fn gradient(s: &ScalarField, x: &[f64], t: f64) -> Result<Gradient, FieldError> {
    check_state(s.dimension, x)?;
    let mut kink = false;
    let mut values = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let r = s.body.eval_with(&dual_state(x, Some(i)), Dual::from_f64(t), &mut kink)?;
        values.push(r.deriv);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Gradient { values, norm, kink })
}

/// ∂S/∂t by one dual sweep seeded in t.
pub fn time_derivative(s: &ScalarField, x: &[f64], t: f64) -> Result<f64, FieldError> {
    check_state(s.dimension, x)?;
    let mut kink = false;
    let r = s.body.eval_with(&dual_state(x, None), Dual::new(t, 1.0), &mut kink)?;
    Ok(r.deriv)
}

/// ∇·h = Σi ∂hi/∂xi.
pub fn divergence(h: &VectorField, x: &[f64], t: f64) -> Result<f64, FieldError> {
    check_state(h.dimension(), x)?;
    let mut kink = false;
    let mut sum = 0.0;
    for (i, c) in h.components.iter().enumerate() {
        sum += c.eval_with(&dual_state(x, Some(i)), Dual::from_f64(t), &mut kink)?.deriv;
    }
    Ok(sum)
}

/// Everything the pointwise conditions need at one (x, t), from 2n+1 dual
/// tree evaluations. S⁻¹ quantities go through the dual quotient rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEval {
    pub s: f64,
    pub ds_dt: f64,
    pub grad_s: Vec<f64>,
    pub f: Vec<f64>,
    /// ∂fi/∂xi
    pub df_diag: Vec<f64>,
    /// Σi ∂(S fi)/∂xi
    pub div_sf: f64,
    /// None when S = 0.
    pub inverse: Option<InversePart>,
    pub kink: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversePart {
    pub dsinv_dt: f64,
    pub grad_sinv: Vec<f64>,
    /// Σi ∂(S⁻¹ fi)/∂xi
    pub div_sinv_f: f64,
}

impl PointEval {
    pub fn div_f(&self) -> f64 {
        self.df_diag.iter().sum()
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_s.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ∂S/∂t + ∇S·f
    pub fn lyapunov_rate(&self) -> f64 {
        self.ds_dt + self.grad_s.iter().zip(&self.f).map(|(g, f)| g * f).sum::<f64>()
    }

    /// Σ|∂iS·fi|
    pub fn transport_scale(&self) -> f64 {
        self.grad_s.iter().zip(&self.f).map(|(g, f)| (g * f).abs()).sum()
    }

    /// Σ|∂ifi|
    pub fn divergence_scale(&self) -> f64 {
        self.df_diag.iter().map(|d| d.abs()).sum()
    }
}

/// Evaluate S, f and their first derivatives at (x, t).
pub fn probe(s: &ScalarField, f: &VectorField, x: &[f64], t: f64) -> Result<PointEval, FieldError> {
    let n = f.dimension();
    check_state(n, x)?;
    if s.dimension != n {
        return Err(FieldError::Dimension(format!("certificate has dimension {}, field {n}", s.dimension)));
    }
    let mut kink = false;
    let tc = Dual::from_f64(t);
    let mut grad_s = Vec::with_capacity(n);
    let mut fv = Vec::with_capacity(n);
    let mut df_diag = Vec::with_capacity(n);
    let mut div_sf = 0.0;
    let mut grad_sinv = Vec::with_capacity(n);
    let mut div_sinv_f = 0.0;
    let mut s_val = 0.0;
    for i in 0..n {
        let xs = dual_state(x, Some(i));
        let sd = s.body.eval_with(&xs, tc, &mut kink)?;
        let fd = f.components[i].eval_with(&xs, tc, &mut kink)?;
        s_val = sd.value;
        grad_s.push(sd.deriv);
        fv.push(fd.value);
        df_diag.push(fd.deriv);
        div_sf += (sd * fd).deriv;
        if sd.value != 0.0 {
            let inv = Dual::from_f64(1.0) / sd;
            grad_sinv.push(inv.deriv);
            div_sinv_f += (fd / sd).deriv;
        }
    }
    let st = s.body.eval_with(&dual_state(x, None), Dual::new(t, 1.0), &mut kink)?;
    if n == 0 {
        s_val = st.value;
    }
    let inverse = (s_val != 0.0).then(|| InversePart {
        dsinv_dt: (Dual::from_f64(1.0) / st).deriv,
        grad_sinv,
        div_sinv_f,
    });
    let p = PointEval { s: s_val, ds_dt: st.deriv, grad_s, f: fv, df_diag, div_sf, inverse, kink };
    let finite = p.s.is_finite()
        && p.ds_dt.is_finite()
        && p.div_sf.is_finite()
        && p.grad_s.iter().chain(&p.f).chain(&p.df_diag).all(|v| v.is_finite())
        && p.inverse.as_ref().is_none_or(|q| q.dsinv_dt.is_finite() && q.div_sinv_f.is_finite());
    if !finite {
        return Err(FieldError::NonFinite);
    }
    Ok(p)
}

/// Hessian of S by hyper-dual sweeps over the upper triangle.
pub fn hessian(s: &ScalarField, x: &[f64], t: f64) -> Result<(Vec<Vec<f64>>, bool), FieldError> {
    check_state(s.dimension, x)?;
    let n = x.len();
    let mut kink = false;
    let mut h = vec![vec![0.0; n]; n];
    let tc = HyperDual::from_f64(t);
    for i in 0..n {
        for j in i..n {
            let xs: Vec<HyperDual> = x
                .iter()
                .enumerate()
                .map(|(k, &v)| HyperDual::new(v, f64::from(k == i), f64::from(k == j), 0.0))
                .collect();
            let r = s.body.eval_with(&xs, tc, &mut kink)?;
            h[i][j] = r.d12;
            h[j][i] = r.d12;
        }
    }
    Ok((h, kink))
}

/// ∂S/∂t + ∇·(μ|∇S| f), or the S⁻¹ twin when `inverse` is set.
fn weighted_norm_density(
    s: &ScalarField,
    w: &WeightSpec,
    f: &VectorField,
    x: &[f64],
    t: f64,
    inverse: bool,
) -> Result<f64, FieldError> {
    let p = probe(s, f, x, t)?;
    if p.kink {
        return Err(FieldError::Kink);
    }
    let gnorm = p.grad_norm();
    if gnorm < KINK_TOL {
        return Err(FieldError::Stationary);
    }
    let inv = if inverse { Some(p.inverse.as_ref().ok_or(FieldError::ZeroCertificate)?) } else { None };
    let n = x.len();
    // weight W and its partials ∂iW
    let (wv, dw): (f64, Vec<f64>) = match w {
        WeightSpec::SWeight => (p.s, p.grad_s.clone()),
        WeightSpec::InvSWeight => {
            let q = inv.or(p.inverse.as_ref()).ok_or(FieldError::ZeroCertificate)?;
            (1.0 / p.s, q.grad_sinv.clone())
        }
        WeightSpec::ExplicitMu(mu) => {
            check_dim(mu, n, "weight")?;
            let (hs, hk) = hessian(s, x, t)?;
            if hk {
                return Err(FieldError::Kink);
            }
            // ∂i|∇S| = Σj ∂jS ∂i∂jS / |∇S|
            let dnorm: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| p.grad_s[j] * hs[i][j]).sum::<f64>() / gnorm)
                .collect();
            let (nv, dn): (f64, Vec<f64>) = if inverse {
                let s2 = p.s * p.s;
                let s3 = s2 * p.s;
                (
                    gnorm / s2,
                    (0..n).map(|i| dnorm[i] / s2 - 2.0 * gnorm * p.grad_s[i] / s3).collect(),
                )
            } else {
                (gnorm, dnorm)
            };
            let mut kink = false;
            let mut muv = 0.0;
            let mut dmu = Vec::with_capacity(n);
            for i in 0..n {
                let r = mu.eval_with(&dual_state(x, Some(i)), Dual::from_f64(t), &mut kink)?;
                muv = r.value;
                dmu.push(r.deriv);
            }
            if n == 0 {
                muv = mu.eval(x, t)?;
            }
            if kink {
                return Err(FieldError::Kink);
            }
            (muv * nv, (0..n).map(|i| dmu[i] * nv + muv * dn[i]).collect())
        }
    };
    let time_term = match inv {
        Some(q) => q.dsinv_dt,
        None => p.ds_dt,
    };
    let div: f64 = (0..n).map(|i| wv * p.df_diag[i] + p.f[i] * dw[i]).sum();
    let out = time_term + div;
    if !out.is_finite() {
        return Err(FieldError::NonFinite);
    }
    Ok(out)
}

/// Scalar flux density of the given form at (x, t).
///
/// `DivForm` uses w = S unless an explicit weight is given; `InvDivForm`
/// defaults to w = S⁻¹. The weighted-norm forms multiply μ (or the S / S⁻¹
/// shortcut) by |∇S| or |∇S⁻¹|.
pub fn flux_density(
    form: FluxForm,
    s: &ScalarField,
    w: &WeightSpec,
    f: &VectorField,
    x: &[f64],
    t: f64,
) -> Result<f64, FieldError> {
    match form {
        FluxForm::LyapunovRate => Ok(probe(s, f, x, t)?.lyapunov_rate()),
        FluxForm::DivForm => match w {
            WeightSpec::SWeight => Ok({
                let p = probe(s, f, x, t)?;
                p.ds_dt + p.div_sf
            }),
            WeightSpec::InvSWeight => {
                let p = probe(s, f, x, t)?;
                let q = p.inverse.as_ref().ok_or(FieldError::ZeroCertificate)?;
                Ok(p.ds_dt + q.div_sinv_f)
            }
            WeightSpec::ExplicitMu(mu) => {
                let p = probe(s, f, x, t)?;
                let muf = VectorField { components: f.components.iter().map(|c| mu.clone() * c.clone()).collect() };
                Ok(p.ds_dt + divergence(&muf, x, t)?)
            }
        },
        FluxForm::InvDivForm => {
            let p = probe(s, f, x, t)?;
            let q = p.inverse.as_ref().ok_or(FieldError::ZeroCertificate)?;
            match w {
                WeightSpec::SWeight => Ok(q.dsinv_dt + p.div_sf),
                WeightSpec::InvSWeight => Ok(q.dsinv_dt + q.div_sinv_f),
                WeightSpec::ExplicitMu(mu) => {
                    let muf =
                        VectorField { components: f.components.iter().map(|c| mu.clone() * c.clone()).collect() };
                    Ok(q.dsinv_dt + divergence(&muf, x, t)?)
                }
            }
        }
        FluxForm::WeightedNorm => weighted_norm_density(s, w, f, x, t, false),
        FluxForm::InvWeightedNorm => weighted_norm_density(s, w, f, x, t, true),
    }
}

/// Sampled sup of ‖f‖/‖x‖^γ. Diagnostic only.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthDiagnostic {
    pub gamma: f64,
    pub observed_c0: f64,
    pub at: Option<(Vec<f64>, f64)>,
    pub samples: usize,
}

pub fn growth_diagnostic(f: &VectorField, gamma: f64, points: &[(Vec<f64>, f64)]) -> GrowthDiagnostic {
    let mut best = GrowthDiagnostic { gamma, observed_c0: 0.0, at: None, samples: 0 };
    for (x, t) in points {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let Ok(v) = f.eval(x, *t) else { continue };
        let ratio = v.iter().map(|c| c * c).sum::<f64>().sqrt() / r.powf(gamma);
        if !ratio.is_finite() {
            continue;
        }
        best.samples += 1;
        if ratio > best.observed_c0 || best.at.is_none() {
            best.observed_c0 = ratio;
            best.at = Some((x.clone(), *t));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1_s(alpha: f64) -> ScalarField {
        ScalarField::parse(&format!("(x1^2 + (1/(t+1))*x2^2 + x3^2)^{alpha}"), 3).unwrap()
    }

    fn ex1_f() -> VectorField {
        VectorField::parse(&[
            "(1/(t+1))*x2 - (2 + sin(2*t))*x1*x3^2",
            "-x1 - (1.5 + cos(3*t))*x2*x3^2",
            "-(t/(t+1))*x3^3",
        ])
        .unwrap()
    }

    #[test]
    fn gradient_examples() {
        let s = ScalarField::parse("x1^2+x2^2", 2).unwrap();
        assert_eq!(gradient(&s, &[1.0, 2.0], 0.0).unwrap().values, vec![2.0, 4.0]);
        let g = gradient(&ex1_s(1.0), &[1.0, 1.0, 1.0], 0.0).unwrap();
        assert_eq!(g.values, vec![2.0, 2.0, 2.0]);
        let q = ScalarField::parse("(x1^2+x2^2)^2", 2).unwrap();
        let g0 = gradient(&q, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(g0.values, vec![0.0, 0.0]);
        assert!(g0.is_stationary());
    }

    #[test]
    fn time_derivative_examples() {
        let s = ScalarField::parse("x1^2 + 3*x2^2", 2).unwrap();
        assert_eq!(time_derivative(&s, &[0.7, -0.2], 5.0).unwrap(), 0.0);
        assert_eq!(time_derivative(&ex1_s(1.0), &[0.0, 1.0, 0.0], 0.0).unwrap(), -1.0);
        let p = ScalarField::parse("exp(-t)*x1^2 + exp(-t)*x2^2", 2).unwrap();
        assert!((time_derivative(&p, &[1.0, 0.0], 0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn divergence_examples() {
        let h = VectorField::parse(&["x1 + 2*x2", "3*x1 + 4*x2"]).unwrap();
        assert_eq!(divergence(&h, &[0.3, -9.0], 1.0).unwrap(), 5.0);
        let ex2 = VectorField::parse(&[
            "-x1 + x1^2 - (t+1)*x2^2 - x3^2",
            "-x2 + 2*x1*x2",
            "-x3 + 2*x1*x3",
        ])
        .unwrap();
        assert_eq!(divergence(&ex2, &[1.0, 0.5, 0.5], 0.0).unwrap(), 3.0);
        assert_eq!(divergence(&ex2, &[0.5, -0.3, 2.0], 7.0).unwrap(), 0.0);
    }

    #[test]
    fn flux_density_product_rule_by_hand() {
        let s = ScalarField::parse("x1^2+x2^2+x3^2", 3).unwrap();
        let f = VectorField::parse(&["-x1", "-x2", "-x3"]).unwrap();
        let x = [1.0, 1.0, 1.0];
        assert_eq!(flux_density(FluxForm::DivForm, &s, &WeightSpec::SWeight, &f, &x, 0.0).unwrap(), -15.0);
        assert_eq!(flux_density(FluxForm::LyapunovRate, &s, &WeightSpec::SWeight, &f, &x, 0.0).unwrap(), -6.0);
        let one = ScalarField::parse("1", 3).unwrap();
        let d = flux_density(FluxForm::DivForm, &one, &WeightSpec::SWeight, &f, &x, 0.0).unwrap();
        assert_eq!(d, divergence(&f, &x, 0.0).unwrap());
    }

    #[test]
    fn example1_rate_matches_closed_form() {
        // closed form at t=0: -2α S0^(α-1) [x3²(φ1x1² + gφ2x2² + φ3x3²) - 0.5 ġ x2²]
        let (s, f) = (ex1_s(1.0), ex1_f());
        let x = [1.0, 1.0, 1.0];
        let rate = flux_density(FluxForm::LyapunovRate, &s, &WeightSpec::SWeight, &f, &x, 0.0).unwrap();
        assert!((rate + 10.0).abs() < 1e-12, "{rate}");
        let p = probe(&s, &f, &x, 0.0).unwrap();
        assert!((p.ds_dt + p.div_sf - p.s * p.div_f() + 10.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_forms_need_nonzero_certificate() {
        let s = ScalarField::parse("x1^2+x2^2", 2).unwrap();
        let f = VectorField::parse(&["-x1", "-x2"]).unwrap();
        let e = flux_density(FluxForm::InvDivForm, &s, &WeightSpec::InvSWeight, &f, &[0.0, 0.0], 0.0);
        assert_eq!(e.unwrap_err(), FieldError::ZeroCertificate);
        let w = flux_density(FluxForm::WeightedNorm, &s, &WeightSpec::SWeight, &f, &[0.0, 0.0], 0.0);
        assert_eq!(w.unwrap_err(), FieldError::Stationary);
    }

    #[test]
    fn weighted_norm_shortcuts_agree_with_explicit_mu() {
        // μ = S/|∇S| reproduces the S weight; |∇S| = 2|x| for S = |x|²
        let s = ScalarField::parse("x1^2+x2^2", 2).unwrap();
        let f = VectorField::parse(&["-x1 + x2*t", "-x2 - x1*t"]).unwrap();
        let mu = crate::expr::parse("(x1^2+x2^2)/(2*sqrt(x1^2+x2^2))", 2).unwrap();
        let x = [0.6, -0.3];
        let a = flux_density(FluxForm::WeightedNorm, &s, &WeightSpec::SWeight, &f, &x, 0.7).unwrap();
        let b = flux_density(FluxForm::WeightedNorm, &s, &WeightSpec::ExplicitMu(mu), &f, &x, 0.7).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        // inverse: |∇S⁻¹| = 2|x|/|x|⁴, μ|∇S⁻¹| = S⁻¹ needs μ = |x|/2
        let mu_inv = crate::expr::parse("sqrt(x1^2+x2^2)/2", 2).unwrap();
        let c = flux_density(FluxForm::InvWeightedNorm, &s, &WeightSpec::InvSWeight, &f, &x, 0.7).unwrap();
        let d = flux_density(FluxForm::InvWeightedNorm, &s, &WeightSpec::ExplicitMu(mu_inv), &f, &x, 0.7).unwrap();
        assert!((c - d).abs() < 1e-12 * c.abs().max(1.0), "{c} vs {d}");
        let e = flux_density(FluxForm::InvDivForm, &s, &WeightSpec::InvSWeight, &f, &x, 0.7).unwrap();
        assert!((c - e).abs() < 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn unit_weight_norm_divergence_for_outward_field() {
        // ∇·(|∇S| x) with S = |x|² in n=2 is 6|x|
        let s = ScalarField::parse("x1^2+x2^2", 2).unwrap();
        let f = VectorField::parse(&["x1", "x2"]).unwrap();
        let one = WeightSpec::ExplicitMu(Expr::Const(1.0));
        let x = [0.3, 0.4];
        let v = flux_density(FluxForm::WeightedNorm, &s, &one, &f, &x, 0.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn closed_loop_assembly() {
        let drift = VectorField::parse(&["x2", "-x1"]).unwrap();
        let g = vec![vec![Expr::Const(0.0)], vec![crate::expr::parse("sin(t)^2", 2).unwrap()]];
        let u = vec![crate::expr::parse("-x2^3", 2).unwrap()];
        let sys = ControlledSystem::new(drift, g, u).unwrap();
        let cl = sys.closed_loop();
        assert_eq!(cl.components()[0], Expr::Var(2));
        let v = cl.eval(&[1.0, 2.0], std::f64::consts::FRAC_PI_2).unwrap();
        assert!((v[1] - (-1.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn growth_diagnostic_reports_observed_bound() {
        let f = VectorField::parse(&["-2*x1", "-2*x2"]).unwrap();
        let pts = vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 0.5], 1.0), (vec![0.0, 0.0], 0.0)];
        let d = growth_diagnostic(&f, 1.0, &pts);
        assert_eq!(d.samples, 2);
        assert!((d.observed_c0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_is_validated() {
        assert!(ScalarField::new(2, Expr::Var(3)).is_err());
        assert!(VectorField::new(vec![Expr::Var(2)]).is_err());
        let s = ScalarField::parse("x1", 1).unwrap();
        assert!(gradient(&s, &[1.0, 2.0], 0.0).is_err());
    }
}
