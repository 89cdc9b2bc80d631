//! Sampled domains: a box in x, a time window, an origin ball and axis-zero
//! exclusion predicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CheckError;

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_EXCLUSION_TOL: f64 = 1e-6;
pub const DEFAULT_T_MAX: f64 = 50.0;
pub const DEFAULT_GRID_PER_AXIS: usize = 21;
pub const DEFAULT_GRID_T: usize = 11;
pub const DEFAULT_RANDOM_SAMPLES: usize = 10_000;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_exclusion_tol() -> f64 {
    DEFAULT_EXCLUSION_TOL
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_grid_per_axis() -> usize {
    DEFAULT_GRID_PER_AXIS
}
fn default_grid_t() -> usize {
    DEFAULT_GRID_T
}
fn default_random_samples() -> usize {
    DEFAULT_RANDOM_SAMPLES
}

/// Excludes points where every listed axis (1-based) is zero within tolerance.
///
/// `[2, 3]` means "x2 = 0 and x3 = 0"; a disjunction is two exclusions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Exclusion {
    pub axes: Vec<usize>,
}

impl Exclusion {
    pub fn axes_zero(axes: &[usize]) -> Self {
        Exclusion { axes: axes.to_vec() }
    }

    pub fn matches(&self, x: &[f64], tol: f64) -> bool {
        !self.axes.is_empty() && self.axes.iter().all(|&a| x.get(a - 1).is_some_and(|v| v.abs() <= tol))
    }
}

/// Box × [0, t_max] minus the origin ball and exclusions, with its sampling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    /// Per-axis `[lo, hi]`.
    pub bounds: Vec<[f64; 2]>,
    /// Radius of the excluded origin ball.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
    #[serde(default = "default_exclusion_tol")]
    pub exclusion_tol: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_grid_per_axis")]
    pub grid_per_axis: usize,
    #[serde(default = "default_grid_t")]
    pub grid_t: usize,
    #[serde(default = "default_random_samples")]
    pub random_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Domain {
    /// Symmetric box `[-half, half]^n` with default sampling.
    pub fn cube(dimension: usize, half: f64, t_max: f64) -> Self {
        Domain {
            bounds: vec![[-half, half]; dimension],
            epsilon: DEFAULT_EPSILON,
            exclusions: Vec::new(),
            exclusion_tol: DEFAULT_EXCLUSION_TOL,
            t_max,
            grid_per_axis: DEFAULT_GRID_PER_AXIS,
            grid_t: DEFAULT_GRID_T,
            random_samples: DEFAULT_RANDOM_SAMPLES,
            seed: 0,
        }
    }

    pub fn with_exclusions(mut self, exclusions: Vec<Exclusion>) -> Self {
        self.exclusions = exclusions;
        self
    }

    pub fn with_sampling(mut self, grid_per_axis: usize, grid_t: usize, random_samples: usize, seed: u64) -> Self {
        self.grid_per_axis = grid_per_axis;
        self.grid_t = grid_t;
        self.random_samples = random_samples;
        self.seed = seed;
        self
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Distance from the origin to the nearest box face it must clear.
    pub fn box_radius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|[lo, hi]| lo.abs().max(hi.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), CheckError> {
        let bad = |m: String| Err(CheckError::InvalidDomain(m));
        if self.bounds.is_empty() {
            return bad("the box needs at least one axis".into());
        }
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("axis {} needs finite lo < hi, got [{lo}, {hi}]", i + 1));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon < self.box_radius()) {
            return bad(format!("epsilon {} must be in [0, box radius {})", self.epsilon, self.box_radius()));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.exclusion_tol >= 0.0) {
            return bad("exclusion_tol must be non-negative".into());
        }
        for e in &self.exclusions {
            if e.axes.iter().any(|&a| a == 0 || a > self.dimension()) {
                return bad(format!("exclusion axes {:?} outside 1..={}", e.axes, self.dimension()));
            }
        }
        Ok(())
    }

    pub fn excluded(&self, x: &[f64]) -> bool {
        self.exclusions.iter().any(|e| e.matches(x, self.exclusion_tol))
    }

    pub fn in_origin_ball(&self, x: &[f64]) -> bool {
        x.iter().map(|v| v * v).sum::<f64>().sqrt() < self.epsilon
    }

    pub fn samples(&self) -> SampleSet {
        SampleSet::new(self)
    }
}

/// `count` evenly spaced points on `[lo, hi]`; a single point sits at the midpoint.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Deterministic sample sequence: the tensor grid (x varying slowest, t
/// fastest) followed by uniform random points.
#[derive(Debug, Clone)]
pub struct SampleSet {
    axes: Vec<Vec<f64>>,
    times: Vec<f64>,
    grid_len: usize,
    random: Vec<(Vec<f64>, f64)>,
}

impl SampleSet {
    fn new(d: &Domain) -> Self {
        let axes: Vec<Vec<f64>> = d.bounds.iter().map(|[lo, hi]| linspace(*lo, *hi, d.grid_per_axis)).collect();
        let times = linspace(0.0, d.t_max, d.grid_t);
        let grid_len = if times.is_empty() { 0 } else { axes.iter().map(Vec::len).product::<usize>() * times.len() };
        let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
        let random = (0..d.random_samples)
            .map(|_| {
                let x = d.bounds.iter().map(|[lo, hi]| rng.random_range(*lo..*hi)).collect();
                (x, rng.random_range(0.0..d.t_max))
            })
            .collect();
        SampleSet { axes, times, grid_len, random }
    }

    pub fn len(&self) -> usize {
        self.grid_len + self.random.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Write sample `i` into `x` and return its time.
    pub fn point(&self, i: usize, x: &mut [f64]) -> f64 {
        if i < self.grid_len {
            let nt = self.times.len();
            let t = self.times[i % nt];
            let mut rest = i / nt;
            for k in (0..self.axes.len()).rev() {
                let m = self.axes[k].len();
                x[k] = self.axes[k][rest % m];
                rest /= m;
            }
            t
        } else {
            let (p, t) = &self.random[i - self.grid_len];
            x.copy_from_slice(p);
            *t
        }
    }

    /// Distinct sampled times: grid times then random times.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.iter().copied().chain(self.random.iter().map(|(_, t)| *t))
    }
}
