//! Convergence-study execution: solves a reference problem and a ladder of
//! coarser levels per fractional order, measures state/control/adjoint
//! errors against the reference, and tabulates observed convergence orders.

use crate::cases::ExampleCase;
use crate::config::StudyConfig;
use rayon::prelude::*;
use subdiffopt::{
    l2_diff, l2_diff_nested, prolong, solve_ocp, Bounds, Error, Mesh1D, NestingMap, NodalFn,
    OcpProblem, OcpSolution, Result, Scheme, TimeGrid,
};

/// Solver settings shared by all study jobs.
const STUDY_TOL: f64 = 1e-10;
const STUDY_MAX_ITER: usize = 400;
const STUDY_DAMPING: f64 = 1.0;

/// Which error table a study produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// Mesh refinement at fixed step count; worst-over-time L2 error.
    Spatial,
    /// Step refinement at fixed mesh; time-summed L2 error.
    TemporalL2,
    /// Step refinement at fixed mesh; worst-over-time L2 error.
    TemporalLinf,
}

impl StudyKind {
    /// Parses the CLI label.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(StudyKind::Spatial),
            "temporal-l2" => Ok(StudyKind::TemporalL2),
            "temporal-linf" => Ok(StudyKind::TemporalLinf),
            other => Err(Error::InvalidArgument(format!(
                "unknown study '{other}', expected spatial, temporal-l2, or temporal-linf"
            ))),
        }
    }

    /// Label used in file names and CSV metadata.
    pub fn label(self) -> &'static str {
        match self {
            StudyKind::Spatial => "spatial",
            StudyKind::TemporalL2 => "temporal-l2",
            StudyKind::TemporalLinf => "temporal-linf",
        }
    }
}

/// Which solution component an error row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// State U.
    State,
    /// Control Q.
    Control,
    /// Adjoint Z.
    Adjoint,
}

impl Variable {
    /// Single-letter label used in CSV rows.
    pub fn label(self) -> &'static str {
        match self {
            Variable::State => "u",
            Variable::Control => "q",
            Variable::Adjoint => "z",
        }
    }

    const ALL: [Variable; 3] = [Variable::State, Variable::Control, Variable::Adjoint];
}

/// Errors across all levels for one (alpha, variable) pair.
#[derive(Debug, Clone)]
pub struct StudyRow {
    /// Fractional order.
    pub alpha: f64,
    /// Solution component.
    pub variable: Variable,
    /// Error per level, in level order.
    pub errors: Vec<f64>,
    /// Pairwise observed orders log2(e_i / e_{i+1}).
    pub eocs: Vec<f64>,
}

impl StudyRow {
    /// Observed order of the finest level pair.
    pub fn final_eoc(&self) -> Option<f64> {
        self.eocs.last().copied()
    }
}

/// A completed study: rows ordered by alpha (input order), then u, q, z.
#[derive(Debug, Clone)]
pub struct ErrorStudy {
    /// Error flavor.
    pub kind: StudyKind,
    /// Example problem.
    pub example: ExampleCase,
    /// Weight scheme.
    pub scheme: Scheme,
    /// Level resolutions in run order.
    pub levels: Vec<usize>,
    /// One row per (alpha, variable).
    pub rows: Vec<StudyRow>,
}

impl ErrorStudy {
    /// Looks up the row for an exact (alpha, variable) pair.
    pub fn row(&self, alpha: f64, variable: Variable) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.alpha == alpha && r.variable == variable)
    }
}

/// Observed order between a coarse and a fine error.
pub fn eoc(coarse: f64, fine: f64) -> f64 {
    if coarse.is_finite() && fine.is_finite() && coarse > 0.0 && fine > 0.0 {
        (coarse / fine).log2()
    } else {
        f64::NAN
    }
}

fn pairwise_eocs(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| eoc(w[0], w[1])).collect()
}

/// Solves one control problem for the study's example.
fn solve_case(cfg: &StudyConfig, alpha: f64, n_steps: usize, cells: usize) -> Result<OcpSolution> {
    let f = cfg.example.source();
    let ud = cfg.example.target();
    let prob = OcpProblem {
        grid: TimeGrid::new(n_steps, cfg.final_time)?,
        mesh: Mesh1D::new(cells)?,
        scheme: cfg.scheme,
        alpha,
        gamma: cfg.gamma,
        bounds: Bounds {
            lower: cfg.lower,
            upper: cfg.upper,
        },
        f: &f,
        target: &ud,
    };
    solve_ocp(&prob, STUDY_TOL, STUDY_MAX_ITER, STUDY_DAMPING)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))
}

fn assemble_rows(
    alphas: &[f64],
    per_alpha: Vec<Vec<[f64; 3]>>, // alpha -> level -> [u, q, z]
) -> Vec<StudyRow> {
    let mut rows = Vec::new();
    for (&alpha, levels) in alphas.iter().zip(&per_alpha) {
        for (vi, variable) in Variable::ALL.into_iter().enumerate() {
            let errors: Vec<f64> = levels.iter().map(|e| e[vi]).collect();
            let eocs = pairwise_eocs(&errors);
            rows.push(StudyRow {
                alpha,
                variable,
                errors,
                eocs,
            });
        }
    }
    rows
}

/// Nodal band projection clamp(-z/gamma) of an adjoint snapshot.
fn band_projection(z: &NodalFn, cfg: &StudyConfig) -> NodalFn {
    NodalFn::new(
        z.values()
            .iter()
            .map(|&v| (-v / cfg.gamma).clamp(cfg.lower, cfg.upper))
            .collect(),
    )
}

/// Mesh-refinement study: all levels and the reference share the same step
/// count, so the time-discretization error cancels in the comparison.
///
/// The control error is measured through the optimality projection at
/// reference resolution: prolong the adjoint, apply the band clamp at the
/// reference nodes, then diff. The clamp of a piecewise-linear field is not
/// itself piecewise linear, so comparing coarse-mesh nodal-clamp
/// representatives directly would add an O(h^1.5) representation term at
/// the active-set boundary and mask the second-order convergence of the
/// projected control when a bound is active.
pub fn run_spatial_study(cfg: &StudyConfig, workers: usize) -> Result<ErrorStudy> {
    let pool = build_pool(workers)?;
    let per_alpha: Vec<Vec<[f64; 3]>> = pool.install(|| {
        cfg.alphas
            .par_iter()
            .map(|&alpha| -> Result<Vec<[f64; 3]>> {
                let ref_mesh = Mesh1D::new(cfg.reference)?;
                let ref_sol = solve_case(cfg, alpha, cfg.time_steps, cfg.reference)?;
                cfg.levels
                    .par_iter()
                    .map(|&cells| -> Result<[f64; 3]> {
                        let mesh = Mesh1D::new(cells)?;
                        let sol = solve_case(cfg, alpha, cfg.time_steps, cells)?;
                        let n = cfg.time_steps;
                        let mut e = [0.0f64; 3];
                        for k in 1..=n {
                            e[0] = e[0].max(l2_diff_nested(
                                &mesh,
                                sol.state.entry(k),
                                &ref_mesh,
                                ref_sol.state.entry(k),
                            )?);
                        }
                        for k in 0..n {
                            let z_lift = prolong(&mesh, sol.adjoint.entry(k), &ref_mesh)?;
                            let z_ref = ref_sol.adjoint.entry(k);
                            e[1] = e[1].max(l2_diff(
                                &ref_mesh,
                                &band_projection(&z_lift, cfg),
                                &band_projection(z_ref, cfg),
                            )?);
                            e[2] = e[2].max(l2_diff(&ref_mesh, &z_lift, z_ref)?);
                        }
                        Ok(e)
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ErrorStudy {
        kind: StudyKind::Spatial,
        example: cfg.example,
        scheme: cfg.scheme,
        levels: cfg.levels.clone(),
        rows: assemble_rows(&cfg.alphas, per_alpha),
    })
}

/// Step-refinement study; returns the time-summed and worst-over-time
/// tables together since they come from the same solves.
pub fn run_temporal_studies(cfg: &StudyConfig, workers: usize) -> Result<(ErrorStudy, ErrorStudy)> {
    let pool = build_pool(workers)?;
    // Per alpha, per level: [[u,q,z] time-summed, [u,q,z] worst-in-time].
    let per_alpha: Vec<Vec<[[f64; 3]; 2]>> = pool.install(|| {
        cfg.alphas
            .par_iter()
            .map(|&alpha| -> Result<Vec<[[f64; 3]; 2]>> {
                let mesh = Mesh1D::new(cfg.cells)?;
                let ref_sol = solve_case(cfg, alpha, cfg.reference, cfg.cells)?;
                cfg.levels
                    .par_iter()
                    .map(|&n_steps| -> Result<[[f64; 3]; 2]> {
                        let sol = solve_case(cfg, alpha, n_steps, cfg.cells)?;
                        let map = NestingMap::between(n_steps, cfg.reference)?;
                        let tau = cfg.final_time / n_steps as f64;
                        let mut sq = [0.0f64; 3];
                        let mut worst = [0.0f64; 3];
                        for k in 1..=n_steps {
                            let diffs = [
                                l2_diff(
                                    &mesh,
                                    sol.state.entry(k),
                                    ref_sol.state.entry(map.fine_index(k)),
                                )?,
                                l2_diff(
                                    &mesh,
                                    &sol.control[k - 1],
                                    &ref_sol.control[map.fine_index(k - 1)],
                                )?,
                                l2_diff(
                                    &mesh,
                                    sol.adjoint.entry(k - 1),
                                    ref_sol.adjoint.entry(map.fine_index(k - 1)),
                                )?,
                            ];
                            for (i, d) in diffs.into_iter().enumerate() {
                                sq[i] += d * d;
                                worst[i] = worst[i].max(d);
                            }
                        }
                        let l2 = [
                            (tau * sq[0]).sqrt(),
                            (tau * sq[1]).sqrt(),
                            (tau * sq[2]).sqrt(),
                        ];
                        Ok([l2, worst])
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let l2_rows: Vec<Vec<[f64; 3]>> = per_alpha
        .iter()
        .map(|lv| lv.iter().map(|e| e[0]).collect())
        .collect();
    let inf_rows: Vec<Vec<[f64; 3]>> = per_alpha
        .iter()
        .map(|lv| lv.iter().map(|e| e[1]).collect())
        .collect();
    let base = |kind: StudyKind, rows| ErrorStudy {
        kind,
        example: cfg.example,
        scheme: cfg.scheme,
        levels: cfg.levels.clone(),
        rows,
    };
    Ok((
        base(StudyKind::TemporalL2, assemble_rows(&cfg.alphas, l2_rows)),
        base(
            StudyKind::TemporalLinf,
            assemble_rows(&cfg.alphas, inf_rows),
        ),
    ))
}

/// Runs the study named by the config.
pub fn run_study(cfg: &StudyConfig, workers: usize) -> Result<ErrorStudy> {
    match cfg.study {
        StudyKind::Spatial => run_spatial_study(cfg, workers),
        StudyKind::TemporalL2 => Ok(run_temporal_studies(cfg, workers)?.0),
        StudyKind::TemporalLinf => Ok(run_temporal_studies(cfg, workers)?.1),
    }
}
