//! Built-in example systems with certificates, domains and an expected
//! verdict table. Each scenario is an ordinary [`Config`], so it can be
//! exported to TOML, edited and run like any user file.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError};
use crate::conditions::{linspace, Verdict};
use crate::expr::parse;
use crate::integrals::NecessaryVerdict;
use crate::params;
use crate::report::{CheckResult, Outcome};

pub const NAMES: [&str; 5] = ["example1", "example2", "example3", "example4", "example5"];

/// What a check in the table must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    HoldsStrict,
    HoldsNonstrict,
    /// Strict or nonstrict.
    Holds,
    Violated,
    Consistent,
    /// Integral check violated or unresolved.
    NotConsistent,
}

impl Expected {
    pub fn matches(self, outcome: &Outcome) -> bool {
        match (self, outcome) {
            (Expected::HoldsStrict, Outcome::Pointwise(r)) => r.verdict == Verdict::HoldsStrict,
            (Expected::HoldsNonstrict, Outcome::Pointwise(r)) => r.verdict == Verdict::HoldsNonstrict,
            (Expected::Holds, Outcome::Pointwise(r)) => r.verdict.holds(),
            (Expected::Violated, Outcome::Pointwise(r)) => r.verdict == Verdict::Violated,
            (Expected::Consistent, Outcome::Integral(r)) => r.verdict == NecessaryVerdict::Consistent,
            (Expected::NotConsistent, Outcome::Integral(r)) => r.verdict != NecessaryVerdict::Consistent,
            (Expected::Violated, Outcome::Integral(r)) => r.verdict == NecessaryVerdict::Violated,
            _ => false,
        }
    }
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Expected::HoldsStrict => "holds (strict)",
            Expected::HoldsNonstrict => "holds (nonstrict)",
            Expected::Holds => "holds",
            Expected::Violated => "violated",
            Expected::Consistent => "consistent",
            Expected::NotConsistent => "not consistent",
        };
        f.write_str(s)
    }
}

/// One row of the table; `index` points into `config.checks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub index: usize,
    pub expected: Expected,
    /// The verdict the original analysis of this example states.
    pub claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Expectation {
    pub fn check(&self, result: &CheckResult) -> bool {
        self.expected.matches(&result.outcome)
    }
}

/// A lower bound on α evaluated from the parameter functions at load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBound {
    pub formula: String,
    /// `None` when the supremum is unbounded on the sampled times.
    pub value: Option<f64>,
    /// Whether α may equal the bound.
    pub inclusive: bool,
    pub times_sampled: usize,
}

impl AlphaBound {
    pub fn admits(&self, alpha: f64) -> bool {
        match self.value {
            None => false,
            Some(b) if self.inclusive => alpha >= b,
            Some(b) => alpha > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub title: String,
    pub config: Config,
    pub expected: Vec<Expectation>,
    pub alpha_bound: Option<AlphaBound>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Unknown(String),
    Config(ConfigError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Unknown(n) => write!(f, "unknown scenario '{n}'; built-ins are {}", NAMES.join(", ")),
            ScenarioError::Config(e) => write!(f, "built-in scenario is malformed: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

const EXAMPLE1: &str = r#"
name = "example1"
description = "x1' = g x2 - phi1 x1 x3^2, x2' = -x1 - phi2 x2 x3^2, x3' = -phi3 x3^3 with S = (x1^2 + g x2^2 + x3^2)^alpha"

[params]
phi1 = "2 + sin(2*t)"
phi2 = "1.5 + cos(3*t)"
phi3 = "t/(t + 1)"
phi0 = "phi1 + phi2 + 3*phi3"
g = "1/(t + 1)"

[system]
dimension = 3
components = ["g*x2 - phi1*x1*x3^2", "-x1 - phi2*x2*x3^2", "-phi3*x3^3"]

[certificate]
s = "(x1^2 + g*x2^2 + x3^2)^alpha"
alpha = 1
weight = "s"

[domain]
bounds = [[-1, 1], [-1, 1], [-1, 1]]
epsilon = 0.05
exclusions = [[2], [3]]
t_max = 20

[integrals]
samples = 100000
c_list = [0.25, 0.5, 1.0]
t_range = [0, 5]
bounds = [[-1.05, 1.05], [-2.5, 2.5], [-1.05, 1.05]]

[simulate]
tf = 1000000
points = [[1, 0, 0], [0.5, 0, 0], [0.5, 0.5, 0.5], [-0.5, 0.8, 0.3], [0.2, -0.4, 0.9]]

[[checks]]
theorem = 3
case = 1
alpha = 1

[[checks]]
theorem = 3
case = 1
alpha = 2

[[checks]]
theorem = 3
case = 1
alpha = 3

[[checks]]
theorem = 3
case = 1
alpha = 2
params = { g = 1 }
label = "g = 1"

[[checks]]
theorem = 3
case = 2
alpha = 5

[[checks]]
theorem = 3
case = 3
alpha = 5

[[checks]]
theorem = 2
case = 1
alpha = 1

[[checks]]
theorem = "positivity"
alpha = 2
"#;

const EXAMPLE2: &str = r#"
name = "example2"
description = "x1' = -x1 + x1^2 - x2^2/g - x3^2, x2' = -x2 + 2 x1 x2, x3' = -x3 + 2 x1 x3 with S = (g x1^2 + x2^2 + g x3^2)^alpha"

[params]
g = "1/(t + 1)"

[system]
dimension = 3
components = ["-x1 + x1^2 - (1/g)*x2^2 - x3^2", "-x2 + 2*x1*x2", "-x3 + 2*x1*x3"]

[certificate]
s = "(g*x1^2 + x2^2 + g*x3^2)^alpha"
alpha = 3
weight = "inv_s"

[domain]
bounds = [[-1.5, 1.5], [-1.5, 1.5], [-1.5, 1.5]]
epsilon = 0.05
t_max = 20

[integrals]
samples = 100000
c_list = [1.0, 2.0]
t_range = [0, 3]
bounds = [[-2.5, 2.5], [-2.5, 2.5], [-2.5, 2.5]]
epsilon = 0.25

[simulate]
tf = 50
points = [[0.5, 0.2, 0.1], [-0.8, 0.5, -0.5], [0.9, 0, 0], [1.5, 0, 0]]

[[checks]]
theorem = 2
case = 2
alpha = 3

[[checks]]
theorem = 3
case = 1
alpha = 3

[[checks]]
theorem = 3
case = 2
alpha = 3

[[checks]]
theorem = 3
case = 3
alpha = 3
"#;

const EXAMPLE3: &str = r#"
name = "example3"
description = "x1' = -4 x1 x2^2 - phi1 x1^3, x2' = g1 x1^2 x2 - phi2 x2^3 - g2 x2 x3^2, x3' = -phi3 x3^3 + 8 x2^2 x3 with S = (g1 x1^2/8 + x2^2/2 + g2 x3^2/16)^alpha"

[params]
phi1 = "2 + sin(t)"
phi2 = "1.5 + cos(3*t)"
phi3 = "1 + 0.5*cos(2*t)"
g1 = "t/(t + 1)"
g2 = "1/(t + 1)"

[system]
dimension = 3
components = ["-4*x1*x2^2 - phi1*x1^3", "g1*x1^2*x2 - phi2*x2^3 - g2*x2*x3^2", "-phi3*x3^3 + 8*x2^2*x3"]

[certificate]
s = "(g1*x1^2/8 + x2^2/2 + g2*x3^2/16)^alpha"
alpha = 2
weight = "s"

[domain]
bounds = [[-1, 1], [-1, 1], [-1, 1]]
epsilon = 0.05
t_max = 20

[integrals]
samples = 100000
c_list = [0.001, 0.005, 0.01]
t_range = [1, 5]
bounds = [[-1.5, 1.5], [-0.6, 0.6], [-3.3, 3.3]]
epsilon = 0.05

[simulate]
tf = 50
points = [[0.5, 0.5, 0.5], [-0.7, 0.3, 0.6], [0.9, -0.9, 0.2]]

[[checks]]
theorem = 3
case = 3
alpha = 2

[[checks]]
theorem = 3
case = 3
alpha = 3

[[checks]]
theorem = 3
case = 3
alpha = 1
params = { phi2 = 1 }
label = "phi2 = 1"

[[checks]]
theorem = 3
case = 2
alpha = 2

[[checks]]
theorem = 3
case = 1
alpha = 2

[[checks]]
theorem = 2
case = 1
alpha = 2

[[checks]]
theorem = 2
case = 2
alpha = 2
c_list = [100.0, 200.0, 1000.0]
"#;

const EXAMPLE4: &str = r#"
name = "example4"
description = "x' = A(t) x with S = (x' P(t) x)^alpha, A = diag(-1, -2), P = I"

[system]
dimension = 2
components = ["-x1", "-2*x2"]

[certificate]
s = "(x1^2 + x2^2)^alpha"
alpha = 2

[domain]
bounds = [[-1, 1], [-1, 1]]
t_max = 10

[linear]
a = [["-1", "0"], ["0", "-2"]]
p = [["1", "0"], ["0", "1"]]

[simulate]
tf = 20
grid = [[-1, 1, 5], [-1, 1, 5]]

[[checks]]
theorem = "linear"
alpha = 1

[[checks]]
theorem = "linear"
alpha = 2

[[checks]]
theorem = 3
case = 3
alpha = 2
"#;

const EXAMPLE5: &str = r#"
name = "example5"
description = "x1' = d x2 - x1 x2^2, x2' = u - g x2 with g = sin(t)^2 and u = gain*(-d x1 - x2^3)"

[params]
d = 0
gain = 1
g = "sin(t)^2"

[system]
dimension = 2
drift = ["d*x2 - x1*x2^2", "-g*x2"]
input = [["0"], ["1"]]
control = ["gain*(-d*x1 - x2^3)"]

[certificate]
s = "(x1^2 + x2^2)^alpha"
alpha = 1

[domain]
bounds = [[-2, 2], [-2, 2]]
epsilon = 0.05
exclusions = [[2]]
t_max = 50

[simulate]
tf = 50
eps_conv = 0.01
grid = [[-2, 2, 9], [-2, 2, 9]]

[[checks]]
theorem = 4
case = 3
alpha = 1
params = { d = 0, gain = 1 }
label = "d = 0, u = -x2^3"

[[checks]]
theorem = 4
case = 3
alpha = 1
params = { d = 1, gain = 1 }
label = "d = 1, u = -x1 - x2^3"

[[checks]]
theorem = 4
case = 3
alpha = 1
params = { d = 1, gain = 0 }
label = "d = 1, u = 0"

[[checks]]
theorem = 4
case = 3
alpha = 1
params = { d = 0, gain = 0 }
label = "d = 0, u = 0"
"#;

fn row(index: usize, expected: Expected, claim: &str, note: Option<&str>) -> Expectation {
    Expectation { index, expected, claim: claim.into(), note: note.map(str::to_string) }
}

/// sup over t of `formulas` (time-only after substitution), scaled by `factor`.
fn sup_bound(cfg: &Config, formulas: &[&str], factor: f64, offset: f64, inclusive: bool, text: &str) -> AlphaBound {
    let times = linspace(0.0, cfg.domain.t_max, 2001);
    let exprs: Vec<_> = formulas
        .iter()
        .map(|f| parse(&params::substitute(f, &cfg.params).expect("built-in params"), 0).expect("built-in formula"))
        .collect();
    let mut sup = f64::NEG_INFINITY;
    for &t in &times {
        for e in &exprs {
            let v = e.eval(&[], t).unwrap_or(f64::INFINITY);
            sup = sup.max(if v.is_finite() { v } else { f64::INFINITY });
        }
    }
    let value = factor * sup + offset;
    AlphaBound { formula: text.into(), value: value.is_finite().then_some(value), inclusive, times_sampled: times.len() }
}

fn example1() -> Result<Scenario, ConfigError> {
    let config = Config::from_toml(EXAMPLE1)?;
    let bound = sup_bound(
        &config,
        &["phi0/phi1", "phi0/phi2", "phi0/phi3"],
        0.5,
        0.0,
        true,
        "alpha >= 0.5 sup_t max(phi0/phi1, phi0/phi2, phi0/phi3)",
    );
    let holds_any = "holds for any alpha with x2 != 0, x3 != 0";
    let expected = vec![
        row(0, Expected::HoldsStrict, holds_any, None),
        row(1, Expected::HoldsStrict, holds_any, None),
        row(2, Expected::HoldsStrict, holds_any, None),
        row(3, Expected::HoldsStrict, holds_any, None),
        row(
            4,
            Expected::Violated,
            "holds for alpha above the phi0/phi_i bound",
            Some("phi3(0) = 0 makes the bound infinite; at t = 0 the x3 drift vanishes and div(f) alone decides the sign"),
        ),
        row(
            5,
            Expected::Violated,
            "holds for alpha above the phi0/phi_i bound",
            Some("same unbounded alpha requirement as case 2"),
        ),
        row(6, Expected::Consistent, "integral condition satisfied for x2 != 0", None),
        row(7, Expected::HoldsStrict, "S positive off the origin", None),
    ];
    Ok(Scenario {
        name: "example1".into(),
        title: "three-dimensional system with an oscillating (x1, x2) pair".into(),
        config,
        expected,
        alpha_bound: Some(bound),
        notes: vec![
            "phi0 = phi1 + phi2 + 3 phi3 is used wherever phi0 appears".into(),
            "trajectories with x2(0) = x3(0) = 0 stay on bounded cycles".into(),
            "x3 decays like (2t)^(-1/2), so the default horizon is 1e6 for the 1e-3 convergence test".into(),
        ],
    })
}

fn example2() -> Result<Scenario, ConfigError> {
    let config = Config::from_toml(EXAMPLE2)?;
    let expected = vec![
        row(0, Expected::Consistent, "the S^-1 condition holds for alpha = 3", None),
        row(1, Expected::Violated, "not satisfied", None),
        row(2, Expected::Violated, "div(f) = -3 + 6 x1 is positive for x1 > 0.5", None),
        row(3, Expected::Violated, "not satisfied", None),
    ];
    Ok(Scenario {
        name: "example2".into(),
        title: "two equilibria, (0,0,0) and (1,0,0)".into(),
        config,
        expected,
        alpha_bound: None,
        notes: vec![
            "the x2^2 coefficient in x1' is 1/g = t + 1".into(),
            "trajectories starting on x1 >= 1, x2 = x3 = 0 do not reach the origin".into(),
            "the superlevel-set integral excludes a ball of radius 0.25 where S^-1 blows up".into(),
        ],
    })
}

fn example3() -> Result<Scenario, ConfigError> {
    let config = Config::from_toml(EXAMPLE3)?;
    let bound = sup_bound(&config, &["4/phi2"], 0.5, -1.5, false, "alpha > 0.5 sup_t (4/phi2) - 1.5, from phi2 > 4/(2 alpha + 3)");
    let expected = vec![
        row(
            0,
            Expected::Violated,
            "holds for phi2 > 4/(2 alpha + 3) and g1 < (2 alpha + 3) phi1",
            Some("min phi2 = 0.5 is below 4/7, so alpha = 2 does not meet the stated bound"),
        ),
        row(1, Expected::Violated, "holds for alpha above the bound", None),
        row(2, Expected::Violated, "first inequality fails when phi2 = 1 < 4/5", None),
        row(3, Expected::Violated, "div(f) is not negative definite", None),
        row(4, Expected::Violated, "holds for any alpha and x != 0", None),
        row(5, Expected::Consistent, "the S-weighted integral is negative for any C", None),
        row(
            6,
            Expected::NotConsistent,
            "the other integral conditions are not satisfied",
            Some("the S^-1 density is heavy-tailed next to the excluded ball, so the sign stays unresolved"),
        ),
    ];
    Ok(Scenario {
        name: "example3".into(),
        title: "cubic system with competing x2 growth".into(),
        config,
        expected,
        alpha_bound: Some(bound),
        notes: vec![
            "the parameter list names phi1 twice; the third function 1 + 0.5 cos(2t) is used as phi3".into(),
            "g1 = t/(t+1) is increasing although the analysis assumes g1' < 0".into(),
            "g1(0) = 0 makes S vanish on the x1 axis at t = 0, so integrals start at t = 1".into(),
        ],
    })
}

fn example4() -> Result<Scenario, ConfigError> {
    let config = Config::from_toml(EXAMPLE4)?;
    let expected = vec![
        row(0, Expected::Violated, "M2 = diag(1, -1) is not negative definite at alpha = 1", None),
        row(1, Expected::HoldsStrict, "M1 = diag(-3.5, -5.5), M2 = diag(-0.5, -2.5) at alpha = 2", None),
        row(2, Expected::HoldsStrict, "case 3 follows from the two matrix inequalities", None),
    ];
    Ok(Scenario {
        name: "example4".into(),
        title: "linear system with a quadratic certificate".into(),
        config,
        expected,
        alpha_bound: None,
        notes: vec!["A and P are constant here; both may depend on t in a user config".into()],
    })
}

fn example5() -> Result<Scenario, ConfigError> {
    let config = Config::from_toml(EXAMPLE5)?;
    let expected = vec![
        row(0, Expected::Violated, "case 3 holds for u = -x2^3 when x2 != 0", None),
        row(1, Expected::Violated, "case 3 holds for u = -x1 - x2^3 when x2 != 0", None),
        row(2, Expected::Violated, "not asymptotically stable for u = 0", None),
        row(3, Expected::Violated, "not asymptotically stable for u = 0", None),
    ];
    Ok(Scenario {
        name: "example5".into(),
        title: "control design with g(t) = sin(t)^2".into(),
        config,
        expected,
        alpha_bound: None,
        notes: vec![
            "u = gain*(-d x1 - x2^3) covers both control laws (gain = 1) and the open loop (gain = 0)".into(),
        ],
    })
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let sc = match name {
        "example1" => example1(),
        "example2" => example2(),
        "example3" => example3(),
        "example4" => example4(),
        "example5" => example5(),
        other => return Err(ScenarioError::Unknown(other.to_string())),
    };
    sc.map_err(ScenarioError::Config)
}

pub fn list() -> Vec<Scenario> {
    NAMES.iter().map(|n| builtin(n).expect("built-in scenarios parse")).collect()
}

impl Scenario {
    /// The scenario as a standalone TOML config.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        self.config.to_toml()
    }
}
