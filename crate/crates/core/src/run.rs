//! Executes a configuration: the requested checks into a [`RunReport`] and
//! the simulation plan into classified trajectories. Shared by the CLI and
//! the test suites.

use std::fmt;

use crate::conditions::{check_control, check_linear, check_sufficient, positivity_check, CheckReport};
use crate::config::{CheckRequest, Config, ConfigError, SimulateConfig, Theorem};
use crate::integrals::{check_necessary, max_on_box, NecessarySettings, DEFAULT_C_FRACTIONS};
use crate::ode::{sweep, SweepResult, SweepSettings};
use crate::params::Params;
use crate::report::{CheckResult, Outcome, RunReport};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl RunError {
    /// 3 for configuration problems, 4 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn runtime(e: impl fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

/// Command-line style overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the config's check list by a single request.
    pub theorem: Option<Theorem>,
    pub case: Option<u8>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub params: Params,
}

/// The config with seed and parameter overrides folded in.
pub fn effective_config(config: &Config, opts: &RunOptions) -> Result<Config, RunError> {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.domain.seed = seed;
        cfg.integrals.seed = Some(seed);
    }
    if opts.params.contains_key("alpha") {
        return Err(ConfigError::Invalid("set alpha with --alpha, not as a parameter".into()).into());
    }
    cfg.params.extend(opts.params.iter().map(|(k, v)| (k.clone(), v.clone())));
    // command-line parameters beat per-check ones
    for req in &mut cfg.checks {
        for k in opts.params.keys() {
            req.params.remove(k);
        }
    }
    if let Some(a) = opts.alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(ConfigError::Invalid(format!("alpha must be positive, got {a}")).into());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Requests to execute after overrides.
pub fn requests(cfg: &Config, opts: &RunOptions) -> Result<Vec<CheckRequest>, RunError> {
    let mut reqs = match opts.theorem {
        Some(th) => vec![CheckRequest { case: opts.case, ..CheckRequest::new(th, None) }],
        None if opts.case.is_some() => {
            return Err(ConfigError::Invalid("--case needs --theorem".into()).into());
        }
        None => cfg.checks.clone(),
    };
    if reqs.is_empty() {
        return Err(ConfigError::Invalid("no checks requested; add [[checks]] or pass --theorem".into()).into());
    }
    if let Some(a) = opts.alpha {
        for r in &mut reqs {
            r.alpha = Some(a);
        }
    }
    for r in &reqs {
        cfg.validate_request(r)?;
    }
    Ok(reqs)
}

/// Execute one request against an already validated config.
pub fn run_request(cfg: &Config, req: &CheckRequest) -> Result<CheckResult, RunError> {
    cfg.validate_request(req)?;
    let alpha = cfg.alpha_for(req);
    let model = cfg.model(alpha, &req.params)?;
    let tol = &cfg.tolerances;
    let domain = &cfg.domain;
    let pointwise = |r: Result<CheckReport, _>| r.map(Outcome::Pointwise).map_err(runtime);
    let case = req.case.unwrap_or(0);
    let outcome = match req.theorem {
        Theorem::Sufficient => pointwise(check_sufficient(case, &model.field, &model.certificate, domain, tol))?,
        Theorem::Control => {
            let sys = model.system.as_ref().ok_or_else(|| ConfigError::Invalid("theorem 4 needs a controlled system".into()))?;
            pointwise(check_control(case, sys, &model.certificate, domain, tol))?
        }
        Theorem::Positivity => pointwise(positivity_check(&model.certificate, domain))?,
        Theorem::Linear => {
            let (a, p) = model.linear.as_ref().ok_or_else(|| ConfigError::Invalid("no [linear] section".into()))?;
            let times: Vec<f64> = match cfg.linear.as_ref().and_then(|l| l.t_samples.clone()) {
                Some(ts) => ts,
                None => domain.samples().times().collect(),
            };
            pointwise(check_linear(a, p, alpha, &times, tol))?
        }
        Theorem::Necessary1 | Theorem::Necessary2 => {
            let ic = &cfg.integrals;
            let region = ic.region(domain);
            let c_list = match req.c_list.clone().or_else(|| ic.c_list.clone()) {
                Some(c) => c,
                None => {
                    let top = max_on_box(&model.certificate, &region);
                    if !(top > 0.0 && top.is_finite()) {
                        return Err(RunError::Runtime(format!(
                            "cannot derive C values: max S on the box is {top}; set integrals.c_list"
                        )));
                    }
                    DEFAULT_C_FRACTIONS.iter().map(|f| f * top).collect()
                }
            };
            let settings = NecessarySettings {
                c_list,
                region,
                samples: ic.samples,
                seed: ic.seed.unwrap_or(domain.seed),
                sigma: ic.sigma,
            };
            let th = if req.theorem == Theorem::Necessary1 { 1 } else { 2 };
            let r = check_necessary(th, case, &model.field, &model.certificate, &model.weight, &settings).map_err(runtime)?;
            Outcome::Integral(r)
        }
    };
    let certificate_positivity = match req.theorem {
        Theorem::Sufficient | Theorem::Control => Some(positivity_check(&model.certificate, domain).map_err(runtime)?.verdict),
        _ => None,
    };
    Ok(CheckResult { request: req.clone(), alpha, status: outcome.status(), certificate_positivity, outcome })
}

/// Run every requested check and assemble the report.
pub fn run_checks(config: &Config, opts: &RunOptions) -> Result<RunReport, RunError> {
    let cfg = effective_config(config, opts)?;
    let reqs = requests(&cfg, opts)?;
    let results = reqs.iter().map(|r| run_request(&cfg, r)).collect::<Result<Vec<_>, _>>()?;
    Ok(RunReport::new(cfg.name.clone(), cfg.domain.seed, results))
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub tf: Option<f64>,
    /// Grid points per axis, replacing the configured counts.
    pub grid: Option<usize>,
    pub alpha: Option<f64>,
    pub params: Params,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub dimension: usize,
    pub plan: SimulateConfig,
    pub results: Vec<SweepResult>,
}

impl SimulationRun {
    pub fn converged_fraction(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        let k = self.results.iter().filter(|r| matches!(r.verdict.class, crate::ode::ConvergenceClass::Converged { .. })).count();
        k as f64 / self.results.len() as f64
    }
}

/// The simulation plan after overrides; without a `[simulate]` section the
/// grid spans the domain box with 5 points per axis.
pub fn simulation_plan(cfg: &Config, opts: &SimOptions) -> Result<SimulateConfig, RunError> {
    let mut plan = cfg.simulate.clone().unwrap_or_else(|| SimulateConfig {
        grid: cfg.domain.bounds.iter().map(|[lo, hi]| (*lo, *hi, 5)).collect(),
        ..Default::default()
    });
    if let Some(tf) = opts.tf {
        plan.tf = tf;
    }
    if let Some(k) = opts.grid {
        plan.grid = if plan.grid.is_empty() {
            cfg.domain.bounds.iter().map(|[lo, hi]| (*lo, *hi, k)).collect()
        } else {
            plan.grid.iter().map(|&(lo, hi, _)| (lo, hi, k)).collect()
        };
    }
    if !(plan.tf > plan.t0) {
        return Err(ConfigError::Invalid(format!("simulate: need tf > t0, got {}", plan.tf)).into());
    }
    Ok(plan)
}

pub fn run_simulation(config: &Config, opts: &SimOptions) -> Result<SimulationRun, RunError> {
    let cfg = effective_config(config, &RunOptions { params: opts.params.clone(), ..Default::default() })?;
    let plan = simulation_plan(&cfg, opts)?;
    let alpha = opts.alpha.unwrap_or(cfg.certificate.alpha);
    let model = cfg.model(alpha, &Params::new())?;
    let n = cfg.dimension();
    let settings = SweepSettings {
        t0: plan.t0,
        tf: plan.tf,
        method: plan.method(),
        options: plan.options(),
        target: plan.target.clone().unwrap_or_else(|| vec![0.0; n]),
        eps_conv: plan.eps_conv,
        window: plan.window,
    };
    let initial = plan.initial_states();
    let results = sweep(&model.field, &initial, &settings).map_err(runtime)?;
    Ok(SimulationRun { dimension: n, plan, results })
}
