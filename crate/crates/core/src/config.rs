//! TOML run configuration: system, certificate, domain, requested checks,
//! integral settings, simulation plan and the optional linear section.
//!
//! Defaults, all overridable:
//!
//! | setting | default |
//! |---|---|
//! | `domain.epsilon` | 0.05 |
//! | `domain.t_max` | 50 |
//! | `domain.grid_per_axis`, `domain.grid_t` | 21, 11 |
//! | `domain.random_samples` | 10⁴ |
//! | `domain.exclusion_tol` | 1e-6 |
//! | `domain.seed` | 0 |
//! | `tolerances` | δ_strict = δ_tol = 1e-9 relative, inconclusive above 10 % excluded |
//! | `integrals.samples` | 10⁵ per C |
//! | `integrals.c_list` | {0.1, 0.25, 0.5, 1}·max S on the box |
//! | `integrals.sigma` | 3 |
//! | `simulate.tf` | 50 |
//! | `simulate.method` | rkf45, rtol 1e-8, atol 1e-10 (rk4 step 0.01) |
//! | `simulate.eps_conv`, `simulate.window` | 1e-3, last 10 % of the span |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conditions::{Domain, MatrixExpr, Tolerances};
use crate::expr::{parse, Expr};
use crate::fields::{ControlledSystem, ScalarField, VectorField, WeightSpec};
use crate::integrals::{Region, DEFAULT_SIGMA};
use crate::ode::{IntegrateOptions, Method, DEFAULT_EPS_CONV, DEFAULT_WINDOW};
use crate::params::{self, ParamError, Params};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax(String),
    Invalid(String),
    Param(ParamError),
    Expression { what: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax(m) => write!(f, "config syntax: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
            ConfigError::Param(e) => write!(f, "parameters: {e}"),
            ConfigError::Expression { what, message } => write!(f, "{what}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<ParamError> for ConfigError {
    fn from(e: ParamError) -> Self {
        ConfigError::Param(e)
    }
}

/// Which condition a request checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TheoremRepr", into = "TheoremRepr")]
pub enum Theorem {
    /// Integral necessary condition, μ ≡ 1.
    Necessary1,
    /// Integral necessary condition with the configured weight.
    Necessary2,
    Sufficient,
    Control,
    Linear,
    Positivity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TheoremRepr {
    Number(u8),
    Name(String),
}

impl TryFrom<TheoremRepr> for Theorem {
    type Error = String;
    fn try_from(r: TheoremRepr) -> Result<Self, String> {
        match r {
            TheoremRepr::Number(1) => Ok(Theorem::Necessary1),
            TheoremRepr::Number(2) => Ok(Theorem::Necessary2),
            TheoremRepr::Number(3) => Ok(Theorem::Sufficient),
            TheoremRepr::Number(4) => Ok(Theorem::Control),
            TheoremRepr::Name(s) => s.parse(),
            TheoremRepr::Number(n) => Err(format!("unknown theorem {n}; expected 1-4, \"linear\" or \"positivity\"")),
        }
    }
}

impl From<Theorem> for TheoremRepr {
    fn from(t: Theorem) -> Self {
        match t {
            Theorem::Necessary1 => TheoremRepr::Number(1),
            Theorem::Necessary2 => TheoremRepr::Number(2),
            Theorem::Sufficient => TheoremRepr::Number(3),
            Theorem::Control => TheoremRepr::Number(4),
            Theorem::Linear => TheoremRepr::Name("linear".into()),
            Theorem::Positivity => TheoremRepr::Name("positivity".into()),
        }
    }
}

impl std::str::FromStr for Theorem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(Theorem::Necessary1),
            "2" => Ok(Theorem::Necessary2),
            "3" => Ok(Theorem::Sufficient),
            "4" => Ok(Theorem::Control),
            "linear" => Ok(Theorem::Linear),
            "positivity" => Ok(Theorem::Positivity),
            other => Err(format!("unknown theorem '{other}'; expected 1-4, linear or positivity")),
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theorem::Necessary1 => f.write_str("1"),
            Theorem::Necessary2 => f.write_str("2"),
            Theorem::Sufficient => f.write_str("3"),
            Theorem::Control => f.write_str("4"),
            Theorem::Linear => f.write_str("linear"),
            Theorem::Positivity => f.write_str("positivity"),
        }
    }
}

impl Theorem {
    pub fn needs_case(self) -> bool {
        !matches!(self, Theorem::Linear | Theorem::Positivity)
    }

    pub fn max_case(self) -> u8 {
        match self {
            Theorem::Necessary1 | Theorem::Necessary2 => 2,
            Theorem::Sufficient | Theorem::Control => 3,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub theorem: Theorem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    /// Overrides `certificate.alpha` for this request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Overrides `[params]` for this request.
    #[serde(default, skip_serializing_if = "Params::is_empty")]
    pub params: Params,
    /// Absolute C values for integral checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CheckRequest {
    pub fn new(theorem: Theorem, case: Option<u8>) -> Self {
        CheckRequest { theorem, case, alpha: None, params: Params::new(), c_list: None, label: None }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_param(mut self, name: &str, value: impl Into<params::ParamValue>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn with_c_list(mut self, c: &[f64]) -> Self {
        self.c_list = Some(c.to_vec());
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn describe(&self) -> String {
        let mut s = match (self.theorem, self.case) {
            (Theorem::Linear | Theorem::Positivity, _) => self.theorem.to_string(),
            (t, Some(c)) => format!("Th{t} case {c}"),
            (t, None) => format!("Th{t}"),
        };
        if let Some(a) = self.alpha {
            s.push_str(&format!(" alpha={a}"));
        }
        for (k, v) in &self.params {
            match v {
                params::ParamValue::Number(x) => s.push_str(&format!(" {k}={x}")),
                params::ParamValue::Formula(e) => s.push_str(&format!(" {k}={e}")),
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dimension: usize,
    /// f(x, t) for an uncontrolled system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    /// ξ(x, t) for ẋ = ξ + g·u.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    /// g(x, t), n rows of m entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<Vec<String>>>,
    /// u(x, t), m entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Vec<String>>,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_weight() -> String {
    "s".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    /// S(x, t); may use the parameter `alpha`.
    pub s: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// "s" (μ|∇S| = S), "inv_s" (μ|∇S⁻¹| = S⁻¹) or a formula for μ.
    #[serde(default = "default_weight")]
    pub weight: String,
}

fn default_int_samples() -> usize {
    100_000
}
fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralConfig {
    #[serde(default = "default_int_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_list: Option<Vec<f64>>,
    /// Defaults to [0, domain.t_max].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    /// Defaults to the domain box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    /// Defaults to the domain's epsilon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Defaults to the domain seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        IntegralConfig {
            samples: default_int_samples(),
            c_list: None,
            t_range: None,
            bounds: None,
            epsilon: None,
            sigma: DEFAULT_SIGMA,
            seed: None,
        }
    }
}

impl IntegralConfig {
    pub fn region(&self, domain: &Domain) -> Region {
        Region {
            bounds: self.bounds.clone().unwrap_or_else(|| domain.bounds.clone()),
            t_range: self.t_range.unwrap_or([0.0, domain.t_max]),
            epsilon: self.epsilon.unwrap_or(domain.epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Rk4,
    Rkf45,
}

fn default_tf() -> f64 {
    50.0
}
fn default_method() -> MethodName {
    MethodName::Rkf45
}
fn default_h() -> f64 {
    0.01
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_max_steps() -> usize {
    IntegrateOptions::default().max_steps
}
fn default_eps_conv() -> f64 {
    DEFAULT_EPS_CONV
}
fn default_window() -> f64 {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_tf")]
    pub tf: f64,
    #[serde(default = "default_method")]
    pub method: MethodName,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_eps_conv")]
    pub eps_conv: f64,
    #[serde(default = "default_window")]
    pub window: f64,
    /// Per axis `[lo, hi, count]`.
    #[serde(default)]
    pub grid: Vec<(f64, f64, usize)>,
    /// Extra initial states after the grid.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            t0: 0.0,
            tf: default_tf(),
            method: default_method(),
            h: default_h(),
            rtol: default_rtol(),
            atol: default_atol(),
            max_steps: default_max_steps(),
            eps_conv: default_eps_conv(),
            window: default_window(),
            grid: Vec::new(),
            points: Vec::new(),
            target: None,
        }
    }
}

impl SimulateConfig {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Rk4 => Method::Rk4 { h: self.h },
            MethodName::Rkf45 => Method::Rkf45 { rtol: self.rtol, atol: self.atol },
        }
    }

    pub fn options(&self) -> IntegrateOptions {
        IntegrateOptions { max_steps: self.max_steps, early_stop_norm: Some(self.eps_conv / 10.0), ..Default::default() }
    }

    pub fn initial_states(&self) -> Vec<Vec<f64>> {
        let mut pts = if self.grid.is_empty() { Vec::new() } else { crate::ode::grid_points(&self.grid) };
        pts.extend(self.points.iter().cloned());
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    /// A(t), rows of time-only formulas.
    pub a: Vec<Vec<String>>,
    /// P(t), symmetric.
    pub p: Vec<Vec<String>>,
    /// Defaults to the domain's sampled times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub params: Params,
    pub system: SystemConfig,
    pub certificate: CertificateConfig,
    pub domain: Domain,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub integrals: IntegralConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
    #[serde(default)]
    pub checks: Vec<CheckRequest>,
}

/// Everything parsed for one parameter assignment.
#[derive(Debug, Clone)]
pub struct Model {
    /// f, or the closed loop ξ + g·u.
    pub field: VectorField,
    pub system: Option<ControlledSystem>,
    pub certificate: ScalarField,
    pub weight: WeightSpec,
    pub linear: Option<(MatrixExpr, MatrixExpr)>,
}

fn parse_expr(what: impl Into<String>, text: &str, params: &Params, dimension: usize) -> Result<Expr, ConfigError> {
    let what = what.into();
    let substituted = params::substitute(text, params)?;
    parse(&substituted, dimension).map_err(|d| ConfigError::Expression {
        what: what.clone(),
        message: format!("{d} in '{substituted}'"),
    })
}

fn parse_list(what: &str, texts: &[String], params: &Params, dimension: usize) -> Result<Vec<Expr>, ConfigError> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| parse_expr(format!("{what} {}", i + 1), t, params, dimension))
        .collect()
}

fn parse_matrix(what: &str, rows: &[Vec<String>], params: &Params, dimension: usize) -> Result<Vec<Vec<Expr>>, ConfigError> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, t)| parse_expr(format!("{what}[{},{}]", i + 1, j + 1), t, params, dimension))
                .collect()
        })
        .collect()
}

fn field_err(what: &str) -> impl Fn(crate::fields::FieldError) -> ConfigError + '_ {
    move |e| ConfigError::Invalid(format!("{what}: {e}"))
}

impl Config {
    /// Parse and validate.
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn dimension(&self) -> usize {
        self.system.dimension
    }

    pub fn is_controlled(&self) -> bool {
        self.system.drift.is_some()
    }

    /// Configured parameters plus `alpha`, then `overrides`.
    pub fn params_for(&self, alpha: f64, overrides: &Params) -> Params {
        let mut p = params::merged(&self.params, overrides);
        p.insert("alpha".into(), alpha.into());
        p
    }

    pub fn model(&self, alpha: f64, overrides: &Params) -> Result<Model, ConfigError> {
        let n = self.system.dimension;
        if n == 0 {
            return Err(ConfigError::Invalid("system.dimension must be at least 1".into()));
        }
        let p = self.params_for(alpha, overrides);
        let sys = &self.system;
        let (field, system) = match (&sys.components, &sys.drift, &sys.input, &sys.control) {
            (Some(c), None, None, None) => {
                check_len("system.components", c.len(), n)?;
                let f = VectorField::new(parse_list("system component", c, &p, n)?).map_err(field_err("system"))?;
                (f, None)
            }
            (None, Some(d), Some(g), Some(u)) => {
                check_len("system.drift", d.len(), n)?;
                let drift = VectorField::new(parse_list("drift component", d, &p, n)?).map_err(field_err("drift"))?;
                let input = parse_matrix("input", g, &p, n)?;
                let control = parse_list("control", u, &p, n)?;
                let cs = ControlledSystem::new(drift, input, control).map_err(field_err("controlled system"))?;
                (cs.closed_loop(), Some(cs))
            }
            _ => {
                return Err(ConfigError::Invalid(
                    "[system] needs either `components` or all of `drift`, `input`, `control`".into(),
                ))
            }
        };
        let certificate =
            ScalarField::new(n, parse_expr("certificate.s", &self.certificate.s, &p, n)?).map_err(field_err("certificate"))?;
        let weight = match self.certificate.weight.trim() {
            "s" | "S" => WeightSpec::SWeight,
            "inv_s" | "inv_S" => WeightSpec::InvSWeight,
            mu => WeightSpec::ExplicitMu(parse_expr("certificate.weight", mu, &p, n)?),
        };
        let linear = match &self.linear {
            None => None,
            Some(l) => {
                let a = parse_matrix("linear.a", &l.a, &p, 0)?;
                let pm = parse_matrix("linear.p", &l.p, &p, 0)?;
                Some((a, pm))
            }
        };
        Ok(Model { field, system, certificate, weight, linear })
    }

    /// Alpha used by `request`.
    pub fn alpha_for(&self, request: &CheckRequest) -> f64 {
        request.alpha.unwrap_or(self.certificate.alpha)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        params::validate(&self.params)?;
        if self.params.contains_key("alpha") {
            return bad("set alpha in [certificate], not [params]".into());
        }
        if !(self.certificate.alpha > 0.0 && self.certificate.alpha.is_finite()) {
            return bad(format!("certificate.alpha must be positive, got {}", self.certificate.alpha));
        }
        if self.domain.dimension() != self.system.dimension {
            return bad(format!(
                "domain has {} axes but the system dimension is {}",
                self.domain.dimension(),
                self.system.dimension
            ));
        }
        self.domain.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let tol = &self.tolerances;
        if !(tol.delta_strict >= 0.0 && tol.delta_tol >= 0.0 && (0.0..=1.0).contains(&tol.inconclusive_fraction)) {
            return bad("tolerances must be non-negative and inconclusive_fraction in [0, 1]".into());
        }
        let ic = &self.integrals;
        if ic.samples == 0 || !(ic.sigma > 0.0) {
            return bad("integrals.samples and integrals.sigma must be positive".into());
        }
        if let Some(c) = &ic.c_list {
            if c.is_empty() || c.iter().any(|v| !(*v > 0.0)) {
                return bad("integrals.c_list needs positive values".into());
            }
        }
        self.integrals.region(&self.domain).validate(self.dimension()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model(self.certificate.alpha, &Params::new())?;
        if let Some(l) = &self.linear {
            let k = l.a.len();
            if k == 0 || l.p.len() != k || l.a.iter().chain(&l.p).any(|r| r.len() != k) {
                return bad("linear.a and linear.p must be square and the same size".into());
            }
            if l.t_samples.as_ref().is_some_and(|ts| ts.is_empty() || ts.iter().any(|t| !t.is_finite())) {
                return bad("linear.t_samples must be a non-empty list of finite times".into());
            }
        }
        if let Some(sim) = &self.simulate {
            validate_simulate(sim, self.dimension())?;
        }
        for (i, req) in self.checks.iter().enumerate() {
            self.validate_request(req).map_err(|e| ConfigError::Invalid(format!("check {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn validate_request(&self, req: &CheckRequest) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        match (req.theorem.needs_case(), req.case) {
            (true, None) => return bad(format!("theorem {} needs a case", req.theorem)),
            (true, Some(c)) if c == 0 || c > req.theorem.max_case() => {
                return bad(format!("theorem {} has cases 1..={}, got {c}", req.theorem, req.theorem.max_case()))
            }
            (false, Some(_)) => return bad(format!("{} takes no case", req.theorem)),
            _ => {}
        }
        if req.theorem == Theorem::Control && !self.is_controlled() {
            return bad("theorem 4 needs a controlled system (drift, input, control)".into());
        }
        if req.theorem == Theorem::Linear && self.linear.is_none() {
            return bad("the linear check needs a [linear] section".into());
        }
        let alpha = self.alpha_for(req);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {alpha}"));
        }
        if req.params.contains_key("alpha") {
            return bad("use `alpha`, not params.alpha".into());
        }
        params::validate(&req.params)?;
        if let Some(c) = &req.c_list {
            if c.is_empty() || c.iter().any(|v| !(*v > 0.0)) {
                return bad("c_list needs positive values".into());
            }
        }
        self.model(alpha, &req.params).map(|_| ())
    }
}

fn check_len(what: &str, got: usize, n: usize) -> Result<(), ConfigError> {
    if got != n {
        return Err(ConfigError::Invalid(format!("{what} has {got} entries, expected {n}")));
    }
    Ok(())
}

fn validate_simulate(sim: &SimulateConfig, n: usize) -> Result<(), ConfigError> {
    let bad = |m: String| Err(ConfigError::Invalid(format!("simulate: {m}")));
    if !(sim.tf > sim.t0) || !sim.t0.is_finite() || !sim.tf.is_finite() {
        return bad(format!("need t0 < tf, got {} and {}", sim.t0, sim.tf));
    }
    if sim.method == MethodName::Rk4 && !(sim.h > 0.0) {
        return bad("h must be positive".into());
    }
    if sim.method == MethodName::Rkf45 && (sim.rtol < 0.0 || sim.atol < 0.0 || sim.rtol + sim.atol <= 0.0) {
        return bad("rtol and atol must be non-negative and not both zero".into());
    }
    if !(sim.eps_conv > 0.0) || !(sim.window > 0.0 && sim.window <= 1.0) {
        return bad("eps_conv must be positive and window in (0, 1]".into());
    }
    if !sim.grid.is_empty() && sim.grid.len() != n {
        return bad(format!("grid has {} axes, expected {n}", sim.grid.len()));
    }
    if sim.grid.iter().any(|(lo, hi, _)| !(lo <= hi)) {
        return bad("grid axes need lo <= hi".into());
    }
    if sim.points.iter().any(|p| p.len() != n || p.iter().any(|v| !v.is_finite())) {
        return bad(format!("points need {n} finite coordinates"));
    }
    if sim.target.as_ref().is_some_and(|t| t.len() != n) {
        return bad(format!("target needs {n} coordinates"));
    }
    Ok(())
}
