//! Command-line driver: forward solves, control-problem solves, and
//! convergence studies over a fractional-diffusion control model.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use subdiffopt::{
    solve_forward, Bounds, FracWeights, Mesh1D, OcpProblem, Scheme, SourceSpec, TimeGrid,
};
use subdiffopt_cli::cases::ExampleCase;
use subdiffopt_cli::config::{parse_list, parse_scheme, Scale, StudyConfig};
use subdiffopt_cli::emit::{emit_csv, emit_profiles, emit_trajectory};
use subdiffopt_cli::study::{run_study, StudyKind};

#[derive(Parser)]
#[command(
    name = "subdiffopt",
    about = "Box-constrained control of a time-fractional diffusion equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Benchmark case: a (zero source) or b (discontinuous source).
    #[arg(long, default_value = "a")]
    example: String,
    /// Time discretization: l1 (piecewise-linear kernel) or cq (backward
    /// Euler convolution quadrature).
    #[arg(long, default_value = "l1")]
    scheme: String,
    /// Fractional order in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 1000)]
    time_steps: usize,
    /// Number of spatial cells.
    #[arg(long, default_value_t = 50)]
    cells: usize,
    /// Final time.
    #[arg(long, default_value_t = 0.1)]
    final_time: f64,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ControlOpts {
    /// Control cost weight.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Lower control bound.
    #[arg(long, default_value_t = 0.0)]
    lower: f64,
    /// Upper control bound.
    #[arg(long, default_value_t = 0.05)]
    upper: f64,
    /// Relative fixed-point stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Maximum fixed-point sweeps.
    #[arg(long, default_value_t = 400)]
    max_iter: usize,
    /// Initial damping factor in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the uncontrolled forward problem and write the state profile.
    Forward {
        #[command(flatten)]
        common: CommonOpts,
        /// Source sampling: pointwise at step ends, or averaged over steps.
        #[arg(long, default_value = "pointwise")]
        source_kind: String,
    },
    /// Solve the control problem and write state/control/adjoint profiles.
    SolveOcp {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        control: ControlOpts,
    },
    /// Run a convergence study and write its error table as CSV.
    Study {
        /// Which refinement is studied: spatial, temporal-l2, or
        /// temporal-linf.
        #[arg(long, default_value = "spatial", conflicts_with = "config")]
        study: String,
        /// Benchmark case: a or b.
        #[arg(long, default_value = "a", conflicts_with = "config")]
        example: String,
        /// Time discretization: l1 or cq.
        #[arg(long, default_value = "l1", conflicts_with = "config")]
        scheme: String,
        /// Comma-separated fractional orders, e.g. 0.4,0.6,0.8.
        #[arg(long, conflicts_with = "config")]
        alpha: Option<String>,
        /// Problem sizes: desk (minutes) or paper (hours).
        #[arg(long, default_value = "desk", conflicts_with = "config")]
        scale: String,
        /// Read the full study configuration from a key = value file
        /// instead of the flags above.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for independent solves.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn run_forward(common: &CommonOpts, source_kind: &str) -> Result<(), String> {
    let example = ExampleCase::parse(&common.example).map_err(|e| e.to_string())?;
    let scheme: Scheme = parse_scheme(&common.scheme).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(common.time_steps, common.final_time).map_err(|e| e.to_string())?;
    let mesh = Mesh1D::new(common.cells).map_err(|e| e.to_string())?;
    let weights =
        FracWeights::new(scheme, common.alpha, grid.n_steps()).map_err(|e| e.to_string())?;
    let f = example.source();
    let source = match source_kind {
        "pointwise" => SourceSpec::pointwise(&f),
        "averaged" => SourceSpec::averaged(&f),
        other => {
            return Err(format!(
                "unknown source kind '{other}' (expected pointwise or averaged)"
            ))
        }
    };
    let state = solve_forward(&grid, &mesh, &weights, &source, None).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| format!("cannot create {}: {e}", common.out.display()))?;
    let path = common.out.join("profile_u.csv");
    emit_trajectory(&path, &mesh, &grid, &state).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_solve_ocp(common: &CommonOpts, control: &ControlOpts) -> Result<(), String> {
    let example = ExampleCase::parse(&common.example).map_err(|e| e.to_string())?;
    let scheme: Scheme = parse_scheme(&common.scheme).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(common.time_steps, common.final_time).map_err(|e| e.to_string())?;
    let mesh = Mesh1D::new(common.cells).map_err(|e| e.to_string())?;
    let f = example.source();
    let target = example.target();
    let problem = OcpProblem {
        grid: grid.clone(),
        mesh: mesh.clone(),
        scheme,
        alpha: common.alpha,
        gamma: control.gamma,
        bounds: Bounds {
            lower: control.lower,
            upper: control.upper,
        },
        f: &f,
        target: &target,
    };
    let sol = subdiffopt::solve_ocp(&problem, control.tol, control.max_iter, control.damping)
        .map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| format!("cannot create {}: {e}", common.out.display()))?;
    emit_profiles(&common.out, &mesh, &grid, &sol).map_err(|e| e.to_string())?;
    let summary = format!(
        "objective: {:.12e}\niterations: {}\nresidual: {:.3e}\n",
        sol.objective, sol.iterations, sol.residual
    );
    let path = common.out.join("summary.txt");
    std::fs::write(&path, &summary).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    print!("{summary}");
    println!("wrote profiles to {}", common.out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_study_cmd(
    study: &str,
    example: &str,
    scheme: &str,
    alpha: Option<&str>,
    scale: &str,
    config: Option<&PathBuf>,
    out: &PathBuf,
    workers: usize,
) -> Result<(), String> {
    let cfg = if let Some(path) = config {
        StudyConfig::from_file(path).map_err(|e| e.to_string())?
    } else {
        let kind = StudyKind::parse(study).map_err(|e| e.to_string())?;
        let case = ExampleCase::parse(example).map_err(|e| e.to_string())?;
        let scale = Scale::parse(scale).map_err(|e| e.to_string())?;
        let mut cfg = StudyConfig::preset(kind, case, scale);
        cfg.scheme = parse_scheme(scheme).map_err(|e| e.to_string())?;
        if let Some(list) = alpha {
            cfg.alphas = parse_list(list, "alpha").map_err(|e| e.to_string())?;
        }
        cfg
    };
    let study = run_study(&cfg, workers).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let name = format!("{}_{}.csv", study.kind.label(), study.example.label());
    let path = out.join(name);
    emit_csv(&study, &cfg, &path).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    for row in &study.rows {
        let eoc = row
            .final_eoc()
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "alpha {:>4} {}: finest error {:.5e}, eoc {}",
            row.alpha,
            row.variable.label(),
            row.errors.last().copied().unwrap_or(f64::NAN),
            eoc
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Forward {
            common,
            source_kind,
        } => run_forward(common, source_kind),
        Command::SolveOcp { common, control } => run_solve_ocp(common, control),
        Command::Study {
            study,
            example,
            scheme,
            alpha,
            scale,
            config,
            out,
            workers,
        } => run_study_cmd(
            study,
            example,
            scheme,
            alpha.as_deref(),
            scale,
            config.as_ref(),
            out,
            *workers,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
