//! Pointwise sufficient conditions, control conditions and linear matrix
//! inequalities, checked over a sampled domain.
//!
//! Each inequality is rewritten in `value <= 0` form and its value is the
//! margin. Verdicts compare margins against the tolerances *relative* to a
//! per-sample magnitude scale (the sum of absolute values of the terms that
//! make up the margin), so homogeneous certificates of high degree are not
//! misjudged near the excluded origin ball. Raw margins are reported too.

mod domain;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use domain::{
    linspace, Domain, Exclusion, SampleSet, DEFAULT_EPSILON, DEFAULT_EXCLUSION_TOL, DEFAULT_GRID_PER_AXIS,
    DEFAULT_GRID_T, DEFAULT_RANDOM_SAMPLES, DEFAULT_T_MAX,
};

use crate::autodiff::{eval_dual, Direction};
use crate::expr::{EvalError, Expr};
use crate::fields::{probe, ControlledSystem, FieldError, PointEval, ScalarField, VectorField};
use crate::linalg::{symmetric_eigenvalues, LinalgError, Matrix};

/// Samples per parallel work unit.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum CheckError {
    InvalidDomain(String),
    InvalidInput(String),
    Field(FieldError),
    Eval(EvalError),
    Linalg { t: f64, source: LinalgError },
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::InvalidDomain(m) => write!(f, "invalid domain: {m}"),
            CheckError::InvalidInput(m) => write!(f, "invalid input: {m}"),
            CheckError::Field(e) => write!(f, "{e}"),
            CheckError::Eval(e) => write!(f, "{e}"),
            CheckError::Linalg { t, source } => write!(f, "at t = {t}: {source}"),
        }
    }
}

impl std::error::Error for CheckError {}

impl From<FieldError> for CheckError {
    fn from(e: FieldError) -> Self {
        CheckError::Field(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HoldsStrict,
    HoldsNonstrict,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::HoldsStrict | Verdict::HoldsNonstrict)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HoldsStrict => "HOLDS (strict)",
            Verdict::HoldsNonstrict => "HOLDS (nonstrict)",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionId {
    /// ẋ = f(x, t), cases 1 to 3.
    Sufficient { case: u8 },
    /// Same cases on the closed loop ξ + g·u.
    Control { case: u8 },
    Linear,
    Positivity,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionId::Sufficient { case } => write!(f, "Th3 case {case}"),
            ConditionId::Control { case } => write!(f, "Th4 case {case}"),
            ConditionId::Linear => f.write_str("linear inequalities"),
            ConditionId::Positivity => f.write_str("certificate positivity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Strict hold needs every relative margin below `-delta_strict`.
    pub delta_strict: f64,
    /// Nonstrict hold allows relative margins up to `delta_tol`.
    pub delta_tol: f64,
    /// Excluded fraction above which the verdict is inconclusive.
    pub inconclusive_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { delta_strict: 1e-9, delta_tol: 1e-9, inconclusive_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub t: f64,
    pub inequality: String,
    pub margin: f64,
    pub relative_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub label: String,
    pub worst_margin: Option<f64>,
    pub worst_relative_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleCounts {
    pub total: usize,
    pub in_origin_ball: usize,
    pub excluded_by_predicate: usize,
    pub excluded_by_singularity: usize,
    pub evaluated: usize,
}

impl SampleCounts {
    /// Share of samples outside the origin ball that were not evaluated.
    pub fn excluded_fraction(&self) -> f64 {
        let eligible = self.total - self.in_origin_ball;
        if eligible == 0 {
            return 1.0;
        }
        (self.excluded_by_predicate + self.excluded_by_singularity) as f64 / eligible as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSample {
    pub t: f64,
    pub max_eig_m1: f64,
    pub max_eig_m2: f64,
    /// Largest eigenvalue of M1 + M2 = 2(Ṗ + AᵀP + PA).
    pub max_eig_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub condition: ConditionId,
    pub verdict: Verdict,
    /// Largest raw margin over all samples and inequalities.
    pub worst_margin: Option<f64>,
    /// Largest scale-relative margin; this is what the verdict is based on.
    pub worst_relative_margin: Option<f64>,
    /// Sample attaining the worst relative margin.
    pub witness: Option<Witness>,
    pub inequalities: Vec<InequalityReport>,
    pub counts: SampleCounts,
    /// Case 3 only: samples where both inequalities held but the rate did not.
    pub implication_failures: Option<usize>,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<LinearSample>>,
    pub evidence: String,
}

const EVIDENCE: &str = "sampled evidence, not a proof";

// saturates at ±f64::MAX rather than infinity so reports stay valid JSON
fn relative(raw: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        raw / scale
    } else if raw == 0.0 {
        0.0
    } else {
        raw.signum() * f64::MAX
    }
}

fn labels(case: u8) -> &'static [&'static str] {
    match case {
        1 => &["dS/dt + div(S f) - S div(f) <= 0"],
        2 => &["dS^-1/dt + div(S^-1 f) >= 0", "div(f) <= 0"],
        _ => &["2 dS/dt + div(S f) <= 0", "div(S^-1 f) >= 0"],
    }
}

/// Per-inequality (raw margin, relative margin) at one point, plus the
/// case-3 implication status.
struct Margins {
    items: [(f64, f64); 2],
    len: usize,
    implication_ok: Option<bool>,
}

fn case_margins(case: u8, p: &PointEval, tol: &Tolerances) -> Option<Margins> {
    let t_s = p.ds_dt.abs();
    let g = p.transport_scale();
    let d = p.divergence_scale();
    let s_abs = p.s.abs();
    match case {
        1 => {
            let raw = p.ds_dt + p.div_sf - p.s * p.div_f();
            let scale = t_s + g + 2.0 * s_abs * d;
            Some(Margins { items: [(raw, relative(raw, scale)), (0.0, 0.0)], len: 1, implication_ok: None })
        }
        2 => {
            let q = p.inverse.as_ref()?;
            let gi: f64 = q.grad_sinv.iter().zip(&p.f).map(|(a, b)| (a * b).abs()).sum();
            let raw_a = -(q.dsinv_dt + q.div_sinv_f);
            let scale_a = q.dsinv_dt.abs() + gi + d / s_abs;
            let raw_b = p.div_f();
            Some(Margins {
                items: [(raw_a, relative(raw_a, scale_a)), (raw_b, relative(raw_b, d))],
                len: 2,
                implication_ok: None,
            })
        }
        _ => {
            let q = p.inverse.as_ref()?;
            let gi: f64 = q.grad_sinv.iter().zip(&p.f).map(|(a, b)| (a * b).abs()).sum();
            let raw_a = 2.0 * p.ds_dt + p.div_sf;
            let scale_a = 2.0 * t_s + g + s_abs * d;
            let raw_b = -q.div_sinv_f;
            let scale_b = gi + d / s_abs;
            let (rel_a, rel_b) = (relative(raw_a, scale_a), relative(raw_b, scale_b));
            // 2·rate = A - S²·B, so both holding bounds the rate
            let implication_ok = (rel_a <= tol.delta_tol && rel_b <= tol.delta_tol)
                .then(|| p.lyapunov_rate() <= tol.delta_tol * (scale_a + p.s * p.s * scale_b));
            Some(Margins { items: [(raw_a, rel_a), (raw_b, rel_b)], len: 2, implication_ok })
        }
    }
}

#[derive(Debug, Clone)]
struct Worst {
    rel: f64,
    raw: f64,
    index: usize,
    inequality: usize,
    x: Vec<f64>,
    t: f64,
}

impl Worst {
    /// Larger relative margin wins, then larger raw margin, then lower index.
    fn beats(&self, other: &Worst) -> bool {
        match self.rel.total_cmp(&other.rel) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match self.raw.total_cmp(&other.raw) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => self.index < other.index,
            },
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Acc {
    worst: Option<Worst>,
    per_rel: Vec<Option<f64>>,
    per_raw: Vec<Option<f64>>,
    counts: SampleCounts,
    implication_failures: usize,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if x.total_cmp(&y).is_ge() { x } else { y }),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Acc {
    fn new(inequalities: usize) -> Self {
        Acc { per_rel: vec![None; inequalities], per_raw: vec![None; inequalities], ..Default::default() }
    }

    fn offer(&mut self, cand: Worst) {
        if self.worst.as_ref().is_none_or(|w| cand.beats(w)) {
            self.worst = Some(cand);
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        if let Some(w) = other.worst {
            self.offer(w);
        }
        for k in 0..self.per_rel.len() {
            self.per_rel[k] = max_opt(self.per_rel[k], other.per_rel[k]);
            self.per_raw[k] = max_opt(self.per_raw[k], other.per_raw[k]);
        }
        let (a, b) = (&mut self.counts, other.counts);
        a.total += b.total;
        a.in_origin_ball += b.in_origin_ball;
        a.excluded_by_predicate += b.excluded_by_predicate;
        a.excluded_by_singularity += b.excluded_by_singularity;
        a.evaluated += b.evaluated;
        self.implication_failures += other.implication_failures;
        self
    }
}

/// Evaluate `point` at every sample in parallel and reduce in sample order.
fn sweep_samples<F>(domain: &Domain, inequalities: usize, point: F) -> Acc
where
    F: Fn(&[f64], f64, &mut Acc, usize) + Sync,
{
    let samples = domain.samples();
    let n = domain.dimension();
    let chunks = samples.len().div_ceil(CHUNK);
    let partial: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc::new(inequalities);
            let mut x = vec![0.0; n];
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(samples.len()) {
                let t = samples.point(i, &mut x);
                acc.counts.total += 1;
                if domain.in_origin_ball(&x) {
                    acc.counts.in_origin_ball += 1;
                } else if domain.excluded(&x) {
                    acc.counts.excluded_by_predicate += 1;
                } else {
                    point(&x, t, &mut acc, i);
                }
            }
            acc
        })
        .collect();
    partial.into_iter().fold(Acc::new(inequalities), Acc::merge)
}

fn finish(
    condition: ConditionId,
    labels: &[&str],
    acc: Acc,
    tol: &Tolerances,
    implication: bool,
) -> CheckReport {
    let worst_rel = acc.worst.as_ref().map(|w| w.rel);
    let worst_raw = acc.per_raw.iter().copied().fold(None, max_opt);
    let verdict = if acc.counts.evaluated == 0 || acc.counts.excluded_fraction() > tol.inconclusive_fraction {
        Verdict::Inconclusive
    } else {
        let w = worst_rel.expect("evaluated samples give a worst margin");
        if w > tol.delta_tol {
            Verdict::Violated
        } else if w < -tol.delta_strict {
            Verdict::HoldsStrict
        } else {
            Verdict::HoldsNonstrict
        }
    };
    let witness = acc.worst.map(|w| Witness {
        x: w.x,
        t: w.t,
        inequality: labels[w.inequality].to_string(),
        margin: w.raw,
        relative_margin: w.rel,
    });
    CheckReport {
        condition,
        verdict,
        worst_margin: worst_raw,
        worst_relative_margin: worst_rel,
        witness,
        inequalities: labels
            .iter()
            .enumerate()
            .map(|(k, l)| InequalityReport {
                label: l.to_string(),
                worst_margin: acc.per_raw[k],
                worst_relative_margin: acc.per_rel[k],
            })
            .collect(),
        counts: acc.counts,
        implication_failures: implication.then_some(acc.implication_failures),
        tolerances: *tol,
        linear: None,
        evidence: EVIDENCE.to_string(),
    }
}

fn check_cases(
    condition: ConditionId,
    case: u8,
    f: &VectorField,
    s: &ScalarField,
    domain: &Domain,
    tol: &Tolerances,
) -> Result<CheckReport, CheckError> {
    if !(1..=3).contains(&case) {
        return Err(CheckError::InvalidInput(format!("case must be 1, 2 or 3, got {case}")));
    }
    domain.validate()?;
    let n = f.dimension();
    if s.dimension() != n || domain.dimension() != n {
        return Err(CheckError::InvalidInput(format!(
            "dimensions differ: field {n}, certificate {}, domain {}",
            s.dimension(),
            domain.dimension()
        )));
    }
    let labels = labels(case);
    let acc = sweep_samples(domain, labels.len(), |x, t, acc, index| {
        let p = match probe(s, f, x, t) {
            Ok(p) if !p.kink && p.s != 0.0 && p.grad_s.iter().any(|g| *g != 0.0) => p,
            _ => {
                acc.counts.excluded_by_singularity += 1;
                return;
            }
        };
        let Some(m) = case_margins(case, &p, tol) else {
            acc.counts.excluded_by_singularity += 1;
            return;
        };
        acc.counts.evaluated += 1;
        if m.implication_ok == Some(false) {
            acc.implication_failures += 1;
        }
        for (k, &(raw, rel)) in m.items[..m.len].iter().enumerate() {
            acc.per_rel[k] = max_opt(acc.per_rel[k], Some(rel));
            acc.per_raw[k] = max_opt(acc.per_raw[k], Some(raw));
            let cand = Worst { rel, raw, index, inequality: k, x: Vec::new(), t };
            if acc.worst.as_ref().is_none_or(|w| cand.beats(w)) {
                acc.worst = Some(Worst { x: x.to_vec(), ..cand });
            }
        }
    });
    Ok(finish(condition, labels, acc, tol, case == 3))
}

/// Sufficient condition `case` for ẋ = f(x, t) with certificate S.
pub fn check_sufficient(
    case: u8,
    f: &VectorField,
    s: &ScalarField,
    domain: &Domain,
    tol: &Tolerances,
) -> Result<CheckReport, CheckError> {
    check_cases(ConditionId::Sufficient { case }, case, f, s, domain, tol)
}

/// The same cases on the closed loop ξ + g·u.
pub fn check_control(
    case: u8,
    sys: &ControlledSystem,
    s: &ScalarField,
    domain: &Domain,
    tol: &Tolerances,
) -> Result<CheckReport, CheckError> {
    check_cases(ConditionId::Control { case }, case, &sys.closed_loop(), s, domain, tol)
}

/// S > 0 on the samples and S(0, t) ≤ 1e-12 at the sampled times.
pub fn positivity_check(s: &ScalarField, domain: &Domain) -> Result<CheckReport, CheckError> {
    domain.validate()?;
    let labels = ["S(x,t) > 0 off the origin", "S(0,t) <= 1e-12"];
    let tol = Tolerances { delta_strict: 0.0, delta_tol: 0.0, inconclusive_fraction: 1.0 };
    let mut acc = sweep_samples(domain, 2, |x, t, acc, index| match s.eval(x, t) {
        Ok(v) if v.is_finite() => {
            acc.counts.evaluated += 1;
            let raw = -v;
            acc.per_rel[0] = max_opt(acc.per_rel[0], Some(raw));
            acc.per_raw[0] = max_opt(acc.per_raw[0], Some(raw));
            let cand = Worst { rel: raw, raw, index, inequality: 0, x: Vec::new(), t };
            if acc.worst.as_ref().is_none_or(|w| cand.beats(w)) {
                acc.worst = Some(Worst { x: x.to_vec(), ..cand });
            }
        }
        _ => acc.counts.excluded_by_singularity += 1,
    });
    let origin = vec![0.0; domain.dimension()];
    let samples = domain.samples();
    let mut origin_violation: Option<Worst> = None;
    for t in samples.times() {
        let v = s.eval(&origin, t).map_err(CheckError::Eval)?;
        let raw = v.abs() - 1e-12;
        acc.per_raw[1] = max_opt(acc.per_raw[1], Some(raw));
        acc.per_rel[1] = max_opt(acc.per_rel[1], Some(raw));
        if raw > 0.0 && origin_violation.as_ref().is_none_or(|w| raw > w.raw) {
            origin_violation = Some(Worst { rel: f64::MAX, raw, index: 0, inequality: 1, x: origin.clone(), t });
        }
    }
    if let Some(w) = origin_violation {
        acc.worst = Some(w);
    }
    let mut report = finish(ConditionId::Positivity, &labels, acc, &tol, false);
    // a positive-definiteness check never needs the band: S > 0 exactly
    if report.verdict == Verdict::HoldsNonstrict {
        report.verdict = Verdict::Violated;
    }
    Ok(report)
}

/// Square matrix of time-only expressions.
pub type MatrixExpr = Vec<Vec<Expr>>;

fn eval_matrix(m: &MatrixExpr, t: f64, derivative: bool) -> Result<Matrix, CheckError> {
    let rows = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    let d = eval_dual(e, &[], t, &Direction { dx: Vec::new(), dt: 1.0 }).map_err(CheckError::Eval)?;
                    Ok(if derivative { d.deriv } else { d.value })
                })
                .collect::<Result<Vec<f64>, CheckError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Matrix::from_rows(&rows).map_err(|source| CheckError::Linalg { t, source })
}

/// The pair of matrix inequalities for ẋ = A(t)x with S = (xᵀP(t)x)^α:
/// M1 = 2Ṗ + AᵀP + PA + tr(A)P/α < 0 and M2 = AᵀP + PA − tr(A)P/α < 0.
pub fn check_linear(
    a: &MatrixExpr,
    p: &MatrixExpr,
    alpha: f64,
    t_samples: &[f64],
    tol: &Tolerances,
) -> Result<CheckReport, CheckError> {
    let n = a.len();
    if n == 0 || a.iter().chain(p.iter()).any(|r| r.len() != n) || p.len() != n {
        return Err(CheckError::InvalidInput("A and P must be square matrices of the same size".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CheckError::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if t_samples.is_empty() {
        return Err(CheckError::InvalidInput("no time samples".into()));
    }
    if a.iter().chain(p.iter()).flatten().any(|e| e.max_var() > 0) {
        return Err(CheckError::InvalidInput("A(t) and P(t) may depend on t only".into()));
    }
    let labels = ["2P' + A'P + PA + tr(A)P/alpha < 0", "A'P + PA - tr(A)P/alpha < 0"];
    let mut acc = Acc::new(2);
    let mut detail = Vec::with_capacity(t_samples.len());
    for (index, &t) in t_samples.iter().enumerate() {
        let am = eval_matrix(a, t, false)?;
        let pm = eval_matrix(p, t, false)?;
        let pdot = eval_matrix(p, t, true)?;
        pm.validate_symmetric().map_err(|source| CheckError::Linalg { t, source })?;
        let lin = |e: Result<Matrix, LinalgError>| e.map_err(|source| CheckError::Linalg { t, source });
        let atp = lin(am.transpose().matmul(&pm))?;
        let pa = lin(pm.matmul(&am))?;
        let sym = lin(atp.add(&pa))?;
        let tr = pm.scale(am.trace() / alpha);
        let m1 = lin(lin(pdot.scale(2.0).add(&sym))?.add(&tr))?;
        let m2 = lin(sym.add(&tr.scale(-1.0)))?;
        let sum = lin(m1.add(&m2))?;
        let top = |m: &Matrix| -> Result<f64, CheckError> {
            let v = symmetric_eigenvalues(m).map_err(|source| CheckError::Linalg { t, source })?;
            Ok(*v.last().expect("non-empty"))
        };
        let (e1, e2, es) = (top(&m1)?, top(&m2)?, top(&sum)?);
        detail.push(LinearSample { t, max_eig_m1: e1, max_eig_m2: e2, max_eig_sum: es });
        acc.counts.total += 1;
        acc.counts.evaluated += 1;
        for (k, e) in [e1, e2].into_iter().enumerate() {
            acc.per_rel[k] = max_opt(acc.per_rel[k], Some(e));
            acc.per_raw[k] = max_opt(acc.per_raw[k], Some(e));
            acc.offer(Worst { rel: e, raw: e, index, inequality: k, x: Vec::new(), t });
        }
    }
    let mut report = finish(ConditionId::Linear, &labels, acc, tol, false);
    // negative definiteness is a strict inequality
    if report.verdict == Verdict::HoldsNonstrict {
        report.verdict = Verdict::Violated;
    }
    report.linear = Some(detail);
    Ok(report)
}
