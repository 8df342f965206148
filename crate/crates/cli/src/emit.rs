//! Deterministic text output: study tables as CSV with `#` metadata lines,
//! and space-time solution profiles. Re-running the same study yields
//! byte-identical files.

use crate::config::StudyConfig;
use crate::study::{ErrorStudy, StudyKind};
use std::io::Write;
use std::path::Path;
use subdiffopt::{Error, Mesh1D, NodalFn, OcpSolution, Result, TimeGrid, Trajectory};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
}

/// Scientific notation with six significant digits.
fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

/// Writes one study as CSV: metadata comments, a header naming the level
/// columns, then one row per (alpha, variable) ending with the finest-pair
/// observed order (empty when fewer than two levels ran).
pub fn emit_csv(study: &ErrorStudy, cfg: &StudyConfig, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# study: {}\n", study.kind.label()));
    out.push_str(&format!("# example: {}\n", study.example.label()));
    out.push_str(&format!("# scheme: {}\n", study.scheme.label()));
    out.push_str(&format!("# final_time: {}\n", cfg.final_time));
    out.push_str(&format!("# gamma: {}\n", cfg.gamma));
    out.push_str(&format!("# lower: {}\n", cfg.lower));
    out.push_str(&format!("# upper: {}\n", cfg.upper));
    match study.kind {
        StudyKind::Spatial => {
            out.push_str(&format!("# fixed_time_steps: {}\n", cfg.time_steps));
            out.push_str(&format!("# reference_cells: {}\n", cfg.reference));
            // The reference run shares the level step count, so comparisons
            // isolate the spatial error.
            out.push_str(&format!("# reference_time_steps: {}\n", cfg.time_steps));
        }
        StudyKind::TemporalL2 | StudyKind::TemporalLinf => {
            out.push_str(&format!("# fixed_cells: {}\n", cfg.cells));
            out.push_str(&format!("# reference_time_steps: {}\n", cfg.reference));
        }
    }
    out.push_str("alpha,variable");
    for level in &study.levels {
        out.push_str(&format!(",{level}"));
    }
    out.push_str(",eoc\n");
    for row in &study.rows {
        out.push_str(&format!("{},{}", row.alpha, row.variable.label()));
        for e in &row.errors {
            out.push(',');
            out.push_str(&sci(*e));
        }
        out.push(',');
        if let Some(order) = row.final_eoc() {
            out.push_str(&sci(order));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn write_rows<W: Write>(
    w: &mut W,
    mesh: &Mesh1D,
    entries: &[NodalFn],
    time_of_entry: impl Fn(usize) -> f64,
) -> std::io::Result<()> {
    writeln!(w, "x,t,value")?;
    for (k, entry) in entries.iter().enumerate() {
        let t = time_of_entry(k);
        for (i, v) in entry.values().iter().enumerate() {
            writeln!(w, "{},{},{}", sci(mesh.interior_x(i)), sci(t), sci(*v))?;
        }
    }
    Ok(())
}

/// Writes a trajectory as `x,t,value` rows, one per interior node per time
/// index ((cells - 1) * (steps + 1) rows).
pub fn emit_trajectory(
    path: &Path,
    mesh: &Mesh1D,
    grid: &TimeGrid,
    traj: &Trajectory,
) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, mesh, traj.entries(), |k| grid.time(k)).map_err(|e| io_err(path, e))?;
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Writes the three solution profiles of a solved control problem into
/// `dir`: profile_u.csv and profile_z.csv over t_0..t_N, and profile_q.csv
/// with control slot n stamped at its interval start t_n ((cells - 1) *
/// steps rows).
pub fn emit_profiles(dir: &Path, mesh: &Mesh1D, grid: &TimeGrid, sol: &OcpSolution) -> Result<()> {
    emit_trajectory(&dir.join("profile_u.csv"), mesh, grid, &sol.state)?;
    emit_trajectory(&dir.join("profile_z.csv"), mesh, grid, &sol.adjoint)?;
    let path = dir.join("profile_q.csv");
    let mut buf = Vec::new();
    write_rows(&mut buf, mesh, &sol.control, |k| grid.time(k)).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, buf).map_err(|e| io_err(&path, e))
}
