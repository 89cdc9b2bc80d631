// Pointwise verdicts against direct simulation of the same systems.

use divcheck::ode::{integrate, ConvergenceClass, IntegrateOptions, Method, Termination};
use divcheck::params::Params;
use divcheck::run::{run_request, run_simulation, SimOptions};
use divcheck::scenarios;

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect()
}

#[test]
fn example4_holds_and_every_start_converges() {
    let sc = scenarios::builtin("example4").unwrap();
    let holding = sc.config.checks.iter().any(|r| run_request(&sc.config, r).unwrap().status == divcheck::report::Status::Ok);
    assert!(holding);
    let run = run_simulation(&sc.config, &SimOptions::default()).unwrap();
    assert_eq!(run.results.len(), 25);
    assert_eq!(run.converged_fraction(), 1.0);
}

#[test]
fn example1_converges_off_the_cycles() {
    let sc = scenarios::builtin("example1").unwrap();
    let run = run_simulation(&sc.config, &SimOptions::default()).unwrap();
    for r in &run.results {
        let on_cycle = r.x0[1] == 0.0 && r.x0[2] == 0.0;
        match r.verdict.class {
            ConvergenceClass::Converged { .. } => assert!(!on_cycle, "{:?}", r.x0),
            ConvergenceClass::BoundedNonconvergent => assert!(on_cycle, "{:?}", r.x0),
            ConvergenceClass::Diverged => panic!("diverged from {:?}", r.x0),
        }
    }
}

#[test]
fn example2_second_equilibrium_repels() {
    let sc = scenarios::builtin("example2").unwrap();
    let run = run_simulation(&sc.config, &SimOptions::default()).unwrap();
    let beyond = run.results.iter().find(|r| r.x0[0] > 1.0).expect("a start beyond (1,0,0)");
    assert_eq!(beyond.verdict.class, ConvergenceClass::Diverged);
    assert!(run.results.iter().filter(|r| r.x0[0] < 1.0).all(|r| matches!(r.verdict.class, ConvergenceClass::Converged { .. })));
}

#[test]
fn example5_open_loop_keeps_x1_away() {
    let sc = scenarios::builtin("example5").unwrap();
    let opts = SimOptions { grid: Some(5), params: params(&[("d", 0.0), ("gain", 0.0)]), ..Default::default() };
    let run = run_simulation(&sc.config, &opts).unwrap();
    assert!(run.results.iter().any(|r| r.trajectory.final_state()[0].abs() > 0.1));
    // with d = 1 and the full law every start on the coarse grid converges
    let opts = SimOptions { grid: Some(5), params: params(&[("d", 1.0), ("gain", 1.0)]), ..Default::default() };
    assert_eq!(run_simulation(&sc.config, &opts).unwrap().converged_fraction(), 1.0);
}

#[test]
fn rkf45_and_rk4_agree() {
    let sc = scenarios::builtin("example1").unwrap();
    let model = sc.config.model(1.0, &Params::new()).unwrap();
    let opts = IntegrateOptions { early_stop_norm: None, ..Default::default() };
    let a = integrate(&model.field, &[0.5, 0.5, 0.5], 0.0, 10.0, Method::Rkf45 { rtol: 1e-10, atol: 1e-12 }, &opts).unwrap();
    let b = integrate(&model.field, &[0.5, 0.5, 0.5], 0.0, 10.0, Method::Rk4 { h: 1e-3 }, &opts).unwrap();
    assert_eq!(a.termination, Termination::ReachedTf);
    for (u, v) in a.final_state().iter().zip(b.final_state()) {
        assert!((u - v).abs() < 1e-8, "{u} vs {v}");
    }
}
