//! File output: atomic writes and the trajectory / verdict CSV layouts.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use divcheck::ode::SweepResult;

/// Write via a temp file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot create a temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn num(v: f64) -> String {
    // shortest round-trip form, so identical runs give identical bytes
    format!("{v}")
}

/// trajectory_id, t, x1..xn; one row per recorded state.
pub fn trajectories_csv(results: &[SweepResult], n: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trajectory_id".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (id, r) in results.iter().enumerate() {
        for (t, x) in r.trajectory.times.iter().zip(&r.trajectory.states) {
            let mut row = vec![id.to_string(), num(*t)];
            row.extend(x.iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    Ok(w.into_inner()?)
}

/// trajectory_id, x0_1..x0_n, class, final_norm, final_time, termination.
pub fn verdicts_csv(results: &[SweepResult], n: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trajectory_id".to_string()];
    header.extend((1..=n).map(|i| format!("x0_{i}")));
    header.extend(["class", "final_norm", "final_time", "termination"].map(String::from));
    w.write_record(&header)?;
    for (id, r) in results.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(r.x0.iter().map(|v| num(*v)));
        row.push(r.verdict.class.label().to_string());
        row.push(num(r.verdict.final_norm));
        row.push(num(r.verdict.time));
        row.push(serde_json::to_value(r.trajectory.termination)?.as_str().unwrap_or_default().to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

/// `traj.csv` → `traj.verdicts.csv`.
pub fn companion_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectories".into());
    csv.with_file_name(format!("{stem}.verdicts.csv"))
}
