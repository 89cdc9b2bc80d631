//! `divcheck`: command-line front end for the divergence condition checkers.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use divcheck::config::{Config, Theorem};
use divcheck::params::{ParamValue, Params};
use divcheck::report::{render, RunReport};
use divcheck::run::{run_checks, run_simulation, RunError, RunOptions, SimOptions};
use divcheck::scenarios;

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "divcheck", version, about = "Check divergence-based stability conditions by sampling, and simulate the systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured (or requested) checks and print a summary.
    Check(CheckArgs),
    /// Integrate a grid of initial states and classify each trajectory.
    Simulate(SimulateArgs),
    /// Print a saved JSON report.
    Report {
        path: PathBuf,
    },
    /// List the built-in scenarios, or export one as a config file.
    Scenarios {
        /// Print this scenario's TOML config instead of the list.
        #[arg(long, value_name = "NAME")]
        export: Option<String>,
        /// Write the export here rather than to stdout.
        #[arg(long, short, value_name = "PATH", requires = "export")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// TOML config file.
    #[arg(value_name = "CONFIG", conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario (example1..example5).
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Parameter override, repeatable: NAME=NUMBER or NAME=FORMULA.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, ParamValue)>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    /// 1, 2 (integral), 3 (sufficient), 4 (control), linear or positivity.
    #[arg(long)]
    theorem: Option<Theorem>,
    #[arg(long)]
    case: Option<u8>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Skip the summary on stdout.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    tf: Option<f64>,
    /// Points per axis of the initial-state grid.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Trajectory CSV; verdicts go to <stem>.verdicts.csv next to it.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Explicit path for the verdict CSV.
    #[arg(long, value_name = "PATH")]
    verdicts: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, ParamValue), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(format!("expected NAME=VALUE, got '{s}'"));
    }
    let value = match v.parse::<f64>() {
        Ok(x) => ParamValue::Number(x),
        Err(_) => ParamValue::Formula(v.to_string()),
    };
    Ok((k.to_string(), value))
}

/// Error carrying the exit code it should produce.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(m: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: m.to_string() }
    }
    fn runtime(m: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_RUNTIME, message: m.to_string() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn load(source: &Source) -> Result<(Config, Params), Failure> {
    let config = match (&source.config, &source.scenario) {
        (_, Some(name)) => scenarios::builtin(name).map_err(Failure::config)?.config,
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            Config::from_toml(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Failure::config("give a config file or --scenario")),
    };
    Ok((config, source.params.iter().cloned().collect()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    output::write_atomic(path, bytes).map_err(|e| Failure::config(format!("{e:#}")))
}

fn cmd_check(args: CheckArgs) -> Result<u8, Failure> {
    let (config, params) = load(&args.source)?;
    let opts = RunOptions { theorem: args.theorem, case: args.case, alpha: args.alpha, seed: args.seed, params };
    let report = run_checks(&config, &opts)?;
    if let Some(path) = &args.json {
        write_file(path, report.to_json().as_bytes())?;
    }
    if !args.quiet {
        print!("{}", render(&report));
    }
    Ok(report.status.exit_code() as u8)
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let (config, params) = load(&args.source)?;
    let opts = SimOptions { tf: args.tf, grid: args.grid, alpha: args.alpha, params };
    let run = run_simulation(&config, &opts)?;
    let n = run.dimension;
    let verdicts = output::verdicts_csv(&run.results, n).map_err(Failure::runtime)?;
    match &args.csv {
        Some(path) => {
            let traj = output::trajectories_csv(&run.results, n).map_err(Failure::runtime)?;
            write_file(path, &traj)?;
            let vpath = args.verdicts.clone().unwrap_or_else(|| output::companion_path(path));
            write_file(&vpath, &verdicts)?;
            eprintln!(
                "{} trajectories, {:.1}% converged; wrote {} and {}",
                run.results.len(),
                100.0 * run.converged_fraction(),
                path.display(),
                vpath.display()
            );
        }
        None => {
            if let Some(vpath) = &args.verdicts {
                write_file(vpath, &verdicts)?;
            } else {
                print!("{}", String::from_utf8_lossy(&verdicts));
            }
        }
    }
    Ok(0)
}

fn cmd_report(path: &Path) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let report = RunReport::from_json(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    print!("{}", render(&report));
    Ok(0)
}

fn cmd_scenarios(export: Option<String>, out: Option<PathBuf>) -> Result<u8, Failure> {
    if let Some(name) = export {
        let sc = scenarios::builtin(&name).map_err(Failure::config)?;
        let text = sc.to_toml().map_err(Failure::runtime)?;
        match out {
            Some(path) => write_file(&path, text.as_bytes())?,
            None => print!("{text}"),
        }
        return Ok(0);
    }
    for sc in scenarios::list() {
        println!("{:<10} {}", sc.name, sc.title);
        for e in &sc.expected {
            let req = &sc.config.checks[e.index];
            println!("    {:<36} expect {}", req.describe(), e.expected);
        }
        if let Some(b) = &sc.alpha_bound {
            let bound = b.value.map_or_else(|| "unbounded".to_string(), |v| format!("{v:.4}"));
            let kind = if b.inclusive { "inclusive" } else { "exclusive" };
            println!("    alpha bound ({kind}): {} = {bound}", b.formula);
        }
    }
    Ok(0)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DIVCHECK_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(format!("DIVCHECK_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(Failure::runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage errors are configuration errors; help and version are not
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report { path } => cmd_report(&path),
        Command::Scenarios { export, out } => cmd_scenarios(export, out),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("divcheck: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
