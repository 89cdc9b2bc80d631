//! Monte Carlo integrals over sublevel sets {S ≤ C} and superlevel sets
//! {S⁻¹ ≥ C} in (x, t), the integral necessary conditions built on them, and
//! a divergence-theorem self-test (sphere flux against ball divergence).
//!
//! Samples are drawn in fixed-size chunks, each from its own ChaCha8 stream
//! derived from the seed, and reduced in chunk order. Results therefore do
//! not depend on the number of worker threads.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::fields::{divergence, flux_density, FieldError, FluxForm, ScalarField, VectorField, WeightSpec};

const CHUNK: usize = 4096;
/// Below this acceptance rate rejection sampling is refused.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const FACE_PROBES: usize = 256;
pub const DEFAULT_SIGMA: f64 = 3.0;
/// Default C values as fractions of the largest S sampled on the box.
pub const DEFAULT_C_FRACTIONS: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub enum IntegralError {
    InvalidInput(String),
    TooThin { accepted: usize, total: usize },
    Field(FieldError),
}

impl fmt::Display for IntegralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegralError::InvalidInput(m) => write!(f, "invalid input: {m}"),
            IntegralError::TooThin { accepted, total } => write!(
                f,
                "domain too thin for rejection sampling ({accepted} of {total} samples accepted)"
            ),
            IntegralError::Field(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IntegralError {}

impl From<FieldError> for IntegralError {
    fn from(e: FieldError) -> Self {
        IntegralError::Field(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// {S ≤ C}
    Sublevel,
    /// {S⁻¹ ≥ C}, i.e. {0 < S ≤ 1/C}
    Superlevel,
}

impl Level {
    fn accepts(self, s: f64, c: f64) -> bool {
        match self {
            Level::Sublevel => s <= c,
            Level::Superlevel => s > 0.0 && 1.0 / s >= c,
        }
    }
}

/// Integration region: box in x, time window, origin ball, level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub bounds: Vec<[f64; 2]>,
    /// `[t0, t1]`; `t0 == t1` integrates at a single time without a t factor.
    pub t_range: [f64; 2],
    /// Points with ‖x‖ < epsilon are rejected.
    pub epsilon: f64,
}

impl Region {
    pub fn validate(&self, dimension: usize) -> Result<(), IntegralError> {
        if self.bounds.len() != dimension {
            return Err(IntegralError::InvalidInput(format!("box has {} axes, expected {dimension}", self.bounds.len())));
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|[lo, hi]| !(lo < hi && lo.is_finite() && hi.is_finite())) {
            return Err(IntegralError::InvalidInput("every axis needs finite lo < hi".into()));
        }
        let [t0, t1] = self.t_range;
        if !(t0 <= t1 && t0.is_finite() && t1.is_finite()) {
            return Err(IntegralError::InvalidInput(format!("bad time range [{t0}, {t1}]")));
        }
        if !(self.epsilon >= 0.0) {
            return Err(IntegralError::InvalidInput("epsilon must be non-negative".into()));
        }
        Ok(())
    }

    fn volume(&self) -> f64 {
        let vx: f64 = self.bounds.iter().map(|[lo, hi]| hi - lo).product();
        let [t0, t1] = self.t_range;
        if t1 > t0 {
            vx * (t1 - t0)
        } else {
            vx
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) -> f64 {
        for (v, [lo, hi]) in x.iter_mut().zip(&self.bounds) {
            *v = rng.random_range(*lo..*hi);
        }
        let [t0, t1] = self.t_range;
        if t1 > t0 {
            rng.random_range(t0..t1)
        } else {
            t0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_total: usize,
    pub n_accepted: usize,
    /// Accepted samples where the integrand was singular (counted as 0).
    pub n_singular: usize,
    pub seed: u64,
    pub bounds: Vec<[f64; 2]>,
    pub t_range: [f64; 2],
    pub warnings: Vec<String>,
}

/// Running mean / sum of squared deviations, merged with Chan's formula.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkStats {
    moments: Moments,
    accepted: usize,
    singular: usize,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn check_level(c: f64) -> Result<(), IntegralError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(IntegralError::InvalidInput(format!("level C must be positive, got {c}")));
    }
    Ok(())
}

/// Probe the box faces; S ≤ C there (or S⁻¹ ≥ C) means the box clips the set.
fn face_warnings(s: &ScalarField, level: Level, c: f64, region: &Region, seed: u64) -> Vec<String> {
    let n = region.bounds.len();
    let mut rng = chunk_rng(seed ^ 0x5eed_face, usize::MAX);
    let mut x = vec![0.0; n];
    let mut clipped = 0;
    for k in 0..FACE_PROBES {
        let t = region.draw(&mut rng, &mut x);
        let axis = k % n;
        x[axis] = region.bounds[axis][(k / n) % 2];
        if let Ok(v) = s.eval(&x, t) {
            if level.accepts(v, c) {
                clipped += 1;
            }
        }
    }
    if clipped > 0 {
        vec![format!("box clips the level set at C = {c}: {clipped} of {FACE_PROBES} face probes inside")]
    } else {
        Vec::new()
    }
}

/// Monte Carlo estimate of ∫∫ integrand over the level set of S within `region`.
pub fn estimate_level_integral<F>(
    integrand: F,
    s: &ScalarField,
    level: Level,
    c: f64,
    region: &Region,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate, IntegralError>
where
    F: Fn(&[f64], f64) -> Result<f64, FieldError> + Sync,
{
    check_level(c)?;
    region.validate(s.dimension())?;
    if n < 2 {
        return Err(IntegralError::InvalidInput("need at least 2 samples".into()));
    }
    if s.dimension() != region.bounds.len() {
        return Err(IntegralError::InvalidInput("box dimension differs from the certificate".into()));
    }
    let dim = region.bounds.len();
    let chunks = n.div_ceil(CHUNK);
    let stats: Vec<ChunkStats> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, ci);
            let mut st = ChunkStats::default();
            let mut x = vec![0.0; dim];
            for _ in (ci * CHUNK)..((ci + 1) * CHUNK).min(n) {
                let t = region.draw(&mut rng, &mut x);
                let inside = x.iter().map(|v| v * v).sum::<f64>().sqrt() >= region.epsilon
                    && s.eval(&x, t).is_ok_and(|v| level.accepts(v, c));
                let h = if inside {
                    st.accepted += 1;
                    match integrand(&x, t) {
                        Ok(v) if v.is_finite() => v,
                        _ => {
                            st.singular += 1;
                            0.0
                        }
                    }
                } else {
                    0.0
                };
                st.moments.push(h);
            }
            st
        })
        .collect();
    let total = stats.iter().fold(ChunkStats::default(), |a, b| ChunkStats {
        moments: a.moments.merge(b.moments),
        accepted: a.accepted + b.accepted,
        singular: a.singular + b.singular,
    });
    if (total.accepted as f64) < MIN_ACCEPTANCE * n as f64 || total.accepted == 0 {
        return Err(IntegralError::TooThin { accepted: total.accepted, total: n });
    }
    let vol = region.volume();
    let var = total.moments.m2 / (n as f64 - 1.0);
    Ok(IntegralEstimate {
        value: vol * total.moments.mean,
        std_error: vol * (var / n as f64).sqrt(),
        n_total: n,
        n_accepted: total.accepted,
        n_singular: total.singular,
        seed,
        bounds: region.bounds.clone(),
        t_range: region.t_range,
        warnings: face_warnings(s, level, c, region, seed),
    })
}

/// Sublevel-set estimate, the common case.
pub fn estimate_sublevel_integral<F>(
    integrand: F,
    s: &ScalarField,
    c: f64,
    region: &Region,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate, IntegralError>
where
    F: Fn(&[f64], f64) -> Result<f64, FieldError> + Sync,
{
    estimate_level_integral(integrand, s, Level::Sublevel, c, region, n, seed)
}

/// Indices of the samples an estimate with the same arguments accepts.
pub fn accepted_indices(
    s: &ScalarField,
    level: Level,
    c: f64,
    region: &Region,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>, IntegralError> {
    check_level(c)?;
    region.validate(s.dimension())?;
    let dim = region.bounds.len();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<usize>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, ci);
            let mut x = vec![0.0; dim];
            let mut out = Vec::new();
            for i in (ci * CHUNK)..((ci + 1) * CHUNK).min(n) {
                let t = region.draw(&mut rng, &mut x);
                if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= region.epsilon
                    && s.eval(&x, t).is_ok_and(|v| level.accepts(v, c))
                {
                    out.push(i);
                }
            }
            out
        })
        .collect();
    Ok(parts.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NecessaryVerdict {
    Consistent,
    Violated,
    Inconclusive,
}

impl fmt::Display for NecessaryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NecessaryVerdict::Consistent => "CONSISTENT",
            NecessaryVerdict::Violated => "VIOLATED",
            NecessaryVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryRow {
    pub c: f64,
    pub estimate: IntegralEstimate,
    pub verdict: NecessaryVerdict,
    /// −value on sublevel rows, +value on superlevel rows.
    pub source_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryReport {
    pub theorem: u8,
    pub case: u8,
    pub weight: String,
    pub level: Level,
    pub sigma_multiplier: f64,
    pub rows: Vec<NecessaryRow>,
    pub verdict: NecessaryVerdict,
    pub message: String,
    pub epsilon: f64,
}

/// Inputs of [`check_necessary`] beyond the system itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NecessarySettings {
    pub c_list: Vec<f64>,
    pub region: Region,
    pub samples: usize,
    pub seed: u64,
    pub sigma: f64,
}

fn weight_label(w: &WeightSpec) -> String {
    match w {
        WeightSpec::SWeight => "mu|grad S| = S".into(),
        WeightSpec::InvSWeight => "mu|grad S^-1| = S^-1".into(),
        WeightSpec::ExplicitMu(e) => format!("mu = {e}"),
    }
}

/// Integral necessary condition over every C in the list.
///
/// Theorem 1 integrates ∂S/∂t + ∇·(|∇S| f) (μ ≡ 1); theorem 2 uses `weight`.
/// Case 1 integrates over {S ≤ C} and needs a negative value, case 2 over
/// {S⁻¹ ≥ C} with the S⁻¹ density and needs a positive value.
pub fn check_necessary(
    theorem: u8,
    case: u8,
    f: &VectorField,
    s: &ScalarField,
    weight: &WeightSpec,
    settings: &NecessarySettings,
) -> Result<NecessaryReport, IntegralError> {
    if !(1..=2).contains(&theorem) || !(1..=2).contains(&case) {
        return Err(IntegralError::InvalidInput(format!(
            "integral conditions have theorem 1|2 and case 1|2, got {theorem}/{case}"
        )));
    }
    if f.dimension() != s.dimension() {
        return Err(IntegralError::InvalidInput("field and certificate dimensions differ".into()));
    }
    if settings.c_list.is_empty() {
        return Err(IntegralError::InvalidInput("empty C list".into()));
    }
    let w = if theorem == 1 { WeightSpec::ExplicitMu(Expr::Const(1.0)) } else { weight.clone() };
    let (form, level) = if case == 1 {
        (FluxForm::WeightedNorm, Level::Sublevel)
    } else {
        (FluxForm::InvWeightedNorm, Level::Superlevel)
    };
    let k = settings.sigma;
    let mut rows = Vec::with_capacity(settings.c_list.len());
    for &c in &settings.c_list {
        let est = estimate_level_integral(
            |x, t| flux_density(form, s, &w, f, x, t),
            s,
            level,
            c,
            &settings.region,
            settings.samples,
            settings.seed,
        )?;
        let (lo, hi) = (est.value - k * est.std_error, est.value + k * est.std_error);
        let verdict = match level {
            Level::Sublevel if hi < 0.0 => NecessaryVerdict::Consistent,
            Level::Sublevel if lo > 0.0 => NecessaryVerdict::Violated,
            Level::Superlevel if lo > 0.0 => NecessaryVerdict::Consistent,
            Level::Superlevel if hi < 0.0 => NecessaryVerdict::Violated,
            _ => NecessaryVerdict::Inconclusive,
        };
        let source_strength = match level {
            Level::Sublevel => -est.value,
            Level::Superlevel => est.value,
        };
        rows.push(NecessaryRow { c, estimate: est, verdict, source_strength });
    }
    let verdict = if rows.iter().any(|r| r.verdict == NecessaryVerdict::Violated) {
        NecessaryVerdict::Violated
    } else if rows.iter().all(|r| r.verdict == NecessaryVerdict::Consistent) {
        NecessaryVerdict::Consistent
    } else {
        NecessaryVerdict::Inconclusive
    };
    let message = match verdict {
        NecessaryVerdict::Consistent => "consistent with stability".to_string(),
        NecessaryVerdict::Violated => {
            "necessary condition violated: the system cannot satisfy the stability hypothesis with this S".to_string()
        }
        NecessaryVerdict::Inconclusive => format!("sign not resolved at {k} standard errors for every C"),
    };
    Ok(NecessaryReport {
        theorem,
        case,
        weight: weight_label(&w),
        level,
        sigma_multiplier: k,
        rows,
        verdict,
        message,
        epsilon: settings.region.epsilon,
    })
}

/// Largest S over a coarse grid of the box at a few times.
pub fn max_on_box(s: &ScalarField, region: &Region) -> f64 {
    let n = region.bounds.len();
    let per_axis = if n <= 3 { 9 } else { 5 };
    let axes: Vec<Vec<f64>> =
        region.bounds.iter().map(|[lo, hi]| crate::conditions::linspace(*lo, *hi, per_axis)).collect();
    let times = crate::conditions::linspace(region.t_range[0], region.t_range[1], 5);
    let total = per_axis.pow(n as u32);
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; n];
    for mut idx in 0..total {
        for k in (0..n).rev() {
            x[k] = axes[k][idx % per_axis];
            idx /= per_axis;
        }
        for &t in &times {
            if let Ok(v) = s.eval(&x, t) {
                if v.is_finite() {
                    best = best.max(v);
                }
            }
        }
    }
    best
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm2 += *v * *v;
        }
        if norm2 > 1e-300 {
            let r = norm2.sqrt();
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

fn mean_estimate<F>(n: usize, seed: u64, dim: usize, scale: f64, draw: F) -> Result<(f64, f64), FieldError>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<f64, FieldError> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<Moments, FieldError>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, ci);
            let mut m = Moments::default();
            let mut buf = vec![0.0; dim];
            for _ in (ci * CHUNK)..((ci + 1) * CHUNK).min(n) {
                m.push(draw(&mut rng, &mut buf)?);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    let var = total.m2 / (n as f64 - 1.0);
    Ok((scale * total.mean, scale * (var / n as f64).sqrt()))
}

fn sphere_args(h: &VectorField, radius: f64, center: &[f64], n: usize) -> Result<(), IntegralError> {
    if !(radius > 0.0) {
        return Err(IntegralError::InvalidInput("radius must be positive".into()));
    }
    if center.len() != h.dimension() || h.dimension() == 0 {
        return Err(IntegralError::InvalidInput("center dimension differs from the field".into()));
    }
    if n < 1000 {
        return Err(IntegralError::InvalidInput("need at least 1000 samples".into()));
    }
    Ok(())
}

/// ∮ h·n̂ dΓ over the sphere |x − center| = radius at time t.
pub fn sphere_flux(
    h: &VectorField,
    radius: f64,
    center: &[f64],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate, IntegralError> {
    sphere_args(h, radius, center, n)?;
    let dim = center.len();
    let area = dim as f64 * unit_ball_volume(dim) * radius.powi(dim as i32 - 1);
    let (value, std_error) = mean_estimate(n, seed, dim, area, |rng, u| {
        unit_direction(rng, u);
        let x: Vec<f64> = u.iter().zip(center).map(|(d, c)| c + radius * d).collect();
        let v = h.eval(&x, t)?;
        Ok(v.iter().zip(u.iter()).map(|(a, b)| a * b).sum())
    })?;
    Ok(IntegralEstimate {
        value,
        std_error,
        n_total: n,
        n_accepted: n,
        n_singular: 0,
        seed,
        bounds: center.iter().map(|c| [c - radius, c + radius]).collect(),
        t_range: [t, t],
        warnings: Vec::new(),
    })
}

/// ∫ ∇·h dV over the ball |x − center| ≤ radius at time t.
pub fn ball_divergence_integral(
    h: &VectorField,
    radius: f64,
    center: &[f64],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<IntegralEstimate, IntegralError> {
    sphere_args(h, radius, center, n)?;
    let dim = center.len();
    let vol = unit_ball_volume(dim) * radius.powi(dim as i32);
    let (value, std_error) = mean_estimate(n, seed, dim, vol, |rng, u| {
        unit_direction(rng, u);
        let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
        let x: Vec<f64> = u.iter().zip(center).map(|(d, c)| c + r * d).collect();
        divergence(h, &x, t)
    })?;
    Ok(IntegralEstimate {
        value,
        std_error,
        n_total: n,
        n_accepted: n,
        n_singular: 0,
        seed,
        bounds: center.iter().map(|c| [c - radius, c + radius]).collect(),
        t_range: [t, t],
        warnings: Vec::new(),
    })
}
