//! Versioned run report and its plain-text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conditions::{CheckReport, Verdict};
use crate::config::CheckRequest;
use crate::integrals::{Level, NecessaryReport, NecessaryVerdict};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "divcheck";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Inconclusive,
    Violated,
}

impl Status {
    /// 0 ok, 1 violated, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violated => 1,
            Status::Inconclusive => 2,
        }
    }

    /// Violated dominates inconclusive, which dominates ok.
    pub fn combine(self, other: Status) -> Status {
        self.max(other)
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::HoldsStrict | Verdict::HoldsNonstrict => Status::Ok,
            Verdict::Violated => Status::Violated,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }
}

impl From<NecessaryVerdict> for Status {
    fn from(v: NecessaryVerdict) -> Self {
        match v {
            NecessaryVerdict::Consistent => Status::Ok,
            NecessaryVerdict::Violated => Status::Violated,
            NecessaryVerdict::Inconclusive => Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Pointwise(CheckReport),
    Integral(NecessaryReport),
}

impl Outcome {
    pub fn status(&self) -> Status {
        match self {
            Outcome::Pointwise(r) => r.verdict.into(),
            Outcome::Integral(r) => r.verdict.into(),
        }
    }

    pub fn pointwise(&self) -> Option<&CheckReport> {
        match self {
            Outcome::Pointwise(r) => Some(r),
            Outcome::Integral(_) => None,
        }
    }

    pub fn integral(&self) -> Option<&NecessaryReport> {
        match self {
            Outcome::Integral(r) => Some(r),
            Outcome::Pointwise(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub request: CheckRequest,
    pub alpha: f64,
    pub status: Status,
    /// Advisory positivity verdict of S on the same domain (pointwise checks only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_positivity: Option<Verdict>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_name: Option<String>,
    pub seed: u64,
    pub evidence: String,
    pub status: Status,
    pub results: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportError {
    Json(String),
    Version(u32),
}

impl std::fmt::Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportError::Json(m) => write!(f, "malformed report: {m}"),
            ReportError::Version(v) => write!(f, "report schema {v} is not supported (expected {SCHEMA_VERSION})"),
        }
    }
}

impl std::error::Error for ReportError {}

impl RunReport {
    pub fn new(config_name: Option<String>, seed: u64, results: Vec<CheckResult>) -> Self {
        let status = results.iter().fold(Status::Ok, |s, r| s.combine(r.status));
        RunReport {
            schema_version: SCHEMA_VERSION,
            tool: TOOL.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_name,
            seed,
            evidence: "sampled evidence, not a proof".into(),
            status,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: u32,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Version(probe.schema_version));
        }
        serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4e}"))
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn render_pointwise(out: &mut String, r: &CheckReport) {
    let _ = writeln!(
        out,
        "  {}, worst margin {} (relative {})",
        r.verdict,
        fmt_opt(r.worst_margin),
        fmt_opt(r.worst_relative_margin)
    );
    for q in &r.inequalities {
        let _ = writeln!(out, "    {:<36} worst {} (relative {})", q.label, fmt_opt(q.worst_margin), fmt_opt(q.worst_relative_margin));
    }
    let c = &r.counts;
    let _ = writeln!(
        out,
        "    samples {}: evaluated {}, origin ball {}, excluded by predicate {}, singular {}",
        c.total, c.evaluated, c.in_origin_ball, c.excluded_by_predicate, c.excluded_by_singularity
    );
    if let Some(k) = r.implication_failures {
        let _ = writeln!(out, "    case-3 implication failures: {k}");
    }
    if let Some(lin) = &r.linear {
        let worst = |f: fn(&crate::conditions::LinearSample) -> f64| lin.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "    max eigenvalue over {} times: M1 {:.6e}, M2 {:.6e}, M1+M2 {:.6e}",
            lin.len(),
            worst(|s| s.max_eig_m1),
            worst(|s| s.max_eig_m2),
            worst(|s| s.max_eig_sum)
        );
    }
    if let Some(w) = &r.witness {
        let _ = writeln!(out, "    witness x = {}, t = {:.6}: {} margin {:.4e}", fmt_point(&w.x), w.t, w.inequality, w.margin);
    }
}

fn render_integral(out: &mut String, r: &NecessaryReport) {
    let set = match r.level {
        Level::Sublevel => "{S <= C}",
        Level::Superlevel => "{S^-1 >= C}",
    };
    let _ = writeln!(out, "  {}: {} (over {set}, {}, {}-sigma rule)", r.verdict, r.message, r.weight, r.sigma_multiplier);
    let sigma_note = match r.level {
        Level::Sublevel => "Sigma = -value",
        Level::Superlevel => "Sigma = +value",
    };
    let _ = writeln!(out, "    {:>10} {:>13} {:>11} {:>13} {:>9}  verdict  ({sigma_note})", "C", "value", "std_err", "Sigma", "accepted");
    for row in &r.rows {
        let e = &row.estimate;
        let _ = writeln!(
            out,
            "    {:>10.4e} {:>13.5e} {:>11.3e} {:>13.5e} {:>9}  {}",
            row.c, e.value, e.std_error, row.source_strength, e.n_accepted, row.verdict
        );
        for w in &e.warnings {
            let _ = writeln!(out, "      warning: {w}");
        }
    }
}

/// Human-readable summary of a report.
pub fn render(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} report (schema {}){}, seed {}",
        report.tool,
        report.tool_version,
        report.schema_version,
        report.config_name.as_ref().map_or(String::new(), |n| format!(" for {n}")),
        report.seed
    );
    let _ = writeln!(out, "{}", report.evidence);
    let _ = writeln!(out, "overall: {:?}", report.status);
    for r in &report.results {
        let _ = writeln!(out);
        let mut head = r.request.describe();
        if r.request.alpha.is_none() && r.request.theorem.needs_case() {
            head.push_str(&format!(" alpha={}", r.alpha));
        }
        if let Some(l) = &r.request.label {
            head.push_str(&format!(" [{l}]"));
        }
        let _ = writeln!(out, "{head}");
        match &r.outcome {
            Outcome::Pointwise(p) => render_pointwise(&mut out, p),
            Outcome::Integral(i) => render_integral(&mut out, i),
        }
        if let Some(v) = r.certificate_positivity {
            let _ = writeln!(out, "    certificate positivity (advisory): {v}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_ordering_and_codes() {
        assert_eq!(Status::Ok.combine(Status::Inconclusive), Status::Inconclusive);
        assert_eq!(Status::Violated.combine(Status::Inconclusive), Status::Violated);
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::Violated.exit_code(), 1);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
        assert_eq!(Status::from(Verdict::HoldsNonstrict), Status::Ok);
    }

    #[test]
    fn version_gate() {
        let r = RunReport::new(None, 7, Vec::new());
        let text = r.to_json();
        assert_eq!(RunReport::from_json(&text).unwrap(), r);
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert_eq!(RunReport::from_json(&bumped), Err(ReportError::Version(99)));
        assert!(matches!(RunReport::from_json("{"), Err(ReportError::Json(_))));
    }
}
