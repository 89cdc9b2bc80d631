use std::path::Path;
use std::process::{Command, Output};

use divcheck::report::{render, RunReport, Status};
use divcheck::scenarios;

fn divcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divcheck")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn holds_exits_zero() {
    let o = divcheck(&["check", "--scenario", "example1", "--theorem", "3", "--case", "1", "--alpha", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("HOLDS (strict), worst margin -"));
}

#[test]
fn violation_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = divcheck(&["check", "--scenario", "example2", "--theorem", "3", "--case", "2", "--json", p(&json)]);
    assert_eq!(code(&o), 1);
    let rep = RunReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rep.status, Status::Violated);
    let w = rep.results[0].outcome.pointwise().unwrap().witness.as_ref().unwrap();
    assert!(w.x[0] > 0.5, "witness {:?}", w.x);
    assert!(stdout(&o).contains("witness x = ("));
}

#[test]
fn inconclusive_exits_two() {
    // the heavy-tailed weighted integral of example 3 does not settle
    let sc = scenarios::builtin("example3").unwrap();
    let idx = sc.expected.iter().find(|e| e.expected == scenarios::Expected::NotConsistent).unwrap().index;
    let mut cfg = sc.config.clone();
    cfg.checks = vec![cfg.checks[idx].clone()];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex3.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let o = divcheck(&["check", p(&path)]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("INCONCLUSIVE"));
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\ndimension = 2\ncomponents = [\"-x1\", \"-x2 +\"]\n").unwrap();
    assert_eq!(code(&divcheck(&["check", p(&bad)])), 3);

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "colour = 1\n").unwrap();
    assert_eq!(code(&divcheck(&["check", p(&unknown)])), 3);

    assert_eq!(code(&divcheck(&["check", p(&dir.path().join("absent.toml"))])), 3);
    assert_eq!(code(&divcheck(&["check", "--scenario", "example9"])), 3);
    assert_eq!(code(&divcheck(&["check", "--scenario", "example1", "--case", "1"])), 3);
    assert_eq!(code(&divcheck(&["check", "--scenario", "example1", "--theorem", "7"])), 3);
    assert_eq!(code(&divcheck(&["check", "--scenario", "example1", "--param", "nonsense"])), 3);
    assert_eq!(code(&divcheck(&["check"])), 3);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_divcheck"))
        .args(["scenarios"])
        .env("DIVCHECK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("ex4.json");
    let o = divcheck(&["check", "--scenario", "example4", "--seed", "11", "--json", p(&json)]);
    assert_eq!(code(&o), 1, "example 4 includes the alpha = 1 linear violation");
    let text = std::fs::read_to_string(&json).unwrap();
    let rep = RunReport::from_json(&text).unwrap();
    assert_eq!(rep.seed, 11);
    assert_eq!(rep.to_json(), text);

    let r = divcheck(&["report", p(&json)]);
    assert_eq!(code(&r), 0);
    assert_eq!(stdout(&r), stdout(&o));
    assert_eq!(stdout(&r), render(&rep));
    assert!(stdout(&r).contains("witness"));

    assert_eq!(code(&divcheck(&["report", p(&dir.path().join("missing.json"))])), 3);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"schema_version\": 42}").unwrap();
    assert_eq!(code(&divcheck(&["report", p(&junk)])), 3);
}

#[test]
fn integral_rows_carry_source_strength() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("ex1.json");
    let o = divcheck(&["check", "--scenario", "example1", "--theorem", "1", "--case", "1", "--alpha", "1", "--json", p(&json)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = divcheck(&["report", p(&json)]);
    assert!(stdout(&r).contains("Sigma = -value"));
}

#[test]
fn simulate_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| vec!["simulate".to_string(), "--scenario".into(), "example4".into(), "--grid".into(), "4".into(), "--csv".into(), p(out).into()];
    assert_eq!(code(&divcheck(&args(&a).iter().map(String::as_str).collect::<Vec<_>>())), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_divcheck")).args(args(&b)).env("DIVCHECK_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let va = std::fs::read(dir.path().join("a.verdicts.csv")).unwrap();
    let vb = std::fs::read(dir.path().join("b.verdicts.csv")).unwrap();
    assert_eq!(va, vb);

    let traj = std::fs::read_to_string(&a).unwrap();
    assert!(traj.starts_with("trajectory_id,t,x1,x2\n"));
    let verdicts = String::from_utf8(va).unwrap();
    let mut lines = verdicts.lines();
    assert!(lines.next().unwrap().starts_with("trajectory_id,x0_1,x0_2,class,final_norm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.contains(",converged,")), "{verdicts}");
}

#[test]
fn empty_grid_gives_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = divcheck(&["simulate", "--scenario", "example5", "--grid", "0", "--csv", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "trajectory_id,t,x1,x2\n");
    assert_eq!(
        std::fs::read_to_string(dir.path().join("e.verdicts.csv")).unwrap(),
        "trajectory_id,x0_1,x0_2,class,final_norm,final_time,termination\n"
    );
}

#[test]
fn example1_cycles_do_not_converge() {
    let o = divcheck(&["simulate", "--scenario", "example1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut seen = 0;
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let (x2, x3) = (f[2].parse::<f64>().unwrap(), f[3].parse::<f64>().unwrap());
        if x2 == 0.0 && x3 == 0.0 {
            assert_eq!(f[4], "bounded_nonconvergent", "{row}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn exported_scenario_runs_like_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex4.toml");
    assert_eq!(code(&divcheck(&["scenarios", "--export", "example4", "--out", p(&path)])), 0);
    let a = divcheck(&["check", p(&path)]);
    let b = divcheck(&["check", "--scenario", "example4"]);
    assert_eq!(code(&a), code(&b));
    assert_eq!(stdout(&a), stdout(&b));

    let list = stdout(&divcheck(&["scenarios"]));
    for name in scenarios::NAMES {
        assert!(list.contains(name));
    }
}

#[test]
fn param_override_changes_the_system() {
    // with the open loop (gain = 0) example 5 no longer reaches the origin from every start
    let closed = stdout(&divcheck(&["simulate", "--scenario", "example5", "--grid", "3", "--param", "d=1"]));
    let open = stdout(&divcheck(&["simulate", "--scenario", "example5", "--grid", "3", "--param", "d=1", "--param", "gain=0"]));
    assert_ne!(closed, open);
    assert!(closed.lines().skip(1).all(|r| r.contains(",converged,")), "{closed}");
}
