//! Time stepping for the subdiffusion state equation and its adjoint.
//!
//! Each step solves (tau^(-alpha) * beta_0 * M + A) x = M g - tau^(-alpha) * S
//! where S is the running history sum of mass-weighted past solutions. The
//! forward march runs from t_0 to t_N; the adjoint march runs backward from
//! a zero terminal value with the mirrored weight pattern.

use crate::conv::HistoryAccum;
use crate::error::{Error, Result};
use crate::fem1d::{
    add_load, assemble_mass, assemble_stiffness, project_with, NodalFn, TriDiag, TriFactor,
};
use crate::fracweights::FracWeights;
use crate::grid::{Mesh1D, TimeGrid};

/// Time-indexed sequence of spatial coefficient vectors, entries 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    entries: Vec<NodalFn>,
}

impl Trajectory {
    /// Wraps entries after checking they are non-empty and of uniform length.
    pub fn new(entries: Vec<NodalFn>) -> Result<Self> {
        let first = entries.first().ok_or(Error::LengthMismatch {
            expected: 1,
            got: 0,
        })?;
        let m = first.len();
        for e in &entries {
            if e.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: e.len(),
                });
            }
        }
        Ok(Self { entries })
    }

    fn from_parts(entries: Vec<NodalFn>) -> Self {
        Self { entries }
    }

    /// Number of steps N (entries minus one).
    pub fn n_steps(&self) -> usize {
        self.entries.len() - 1
    }

    /// Spatial coefficient length.
    pub fn width(&self) -> usize {
        self.entries[0].len()
    }

    /// Entry at time index `n`.
    pub fn entry(&self, n: usize) -> &NodalFn {
        &self.entries[n]
    }

    /// All entries in time order.
    pub fn entries(&self) -> &[NodalFn] {
        &self.entries
    }
}

/// How a time-dependent source is turned into per-step data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Project f(., t_n) sampled at the step endpoint.
    Pointwise,
    /// Project the step average (1/tau) * integral of f over (t_{n-1}, t_n).
    Averaged,
}

/// A source term f(x, t) together with its sampling rule.
pub struct SourceSpec<'a> {
    /// Sampling rule.
    pub kind: SourceKind,
    /// The coefficient function.
    pub f: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

impl<'a> SourceSpec<'a> {
    /// Endpoint-sampled source.
    pub fn pointwise(f: &'a (dyn Fn(f64, f64) -> f64 + Sync)) -> Self {
        Self {
            kind: SourceKind::Pointwise,
            f,
        }
    }

    /// Step-averaged source.
    pub fn averaged(f: &'a (dyn Fn(f64, f64) -> f64 + Sync)) -> Self {
        Self {
            kind: SourceKind::Averaged,
            f,
        }
    }
}

/// Assembled matrices and cached factorizations for one (mesh, grid, alpha).
#[derive(Debug, Clone)]
pub struct SystemFactor {
    tau_pow: f64,
    mass: TriDiag,
    stiffness: TriDiag,
    system: TriDiag,
    factor: TriFactor,
    mass_factor: TriFactor,
}

impl SystemFactor {
    /// Scaling tau^(-alpha) applied to the history sum.
    pub fn tau_pow(&self) -> f64 {
        self.tau_pow
    }

    /// Mass matrix.
    pub fn mass(&self) -> &TriDiag {
        &self.mass
    }

    /// Stiffness matrix.
    pub fn stiffness(&self) -> &TriDiag {
        &self.stiffness
    }

    /// The per-step system matrix tau^(-alpha) * beta_0 * M + A.
    pub fn system(&self) -> &TriDiag {
        &self.system
    }

    pub(crate) fn mass_factor(&self) -> &TriFactor {
        &self.mass_factor
    }

    /// Spatial dimension (number of interior nodes).
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

/// Assembles and factorizes the step system for the given discretization.
pub fn factor_system(
    mesh: &Mesh1D,
    grid: &TimeGrid,
    weights: &FracWeights,
) -> Result<SystemFactor> {
    if weights.n_steps() < grid.n_steps() {
        return Err(Error::LengthMismatch {
            expected: grid.n_steps(),
            got: weights.n_steps(),
        });
    }
    let alpha = weights.alpha();
    let tau = grid.tau();
    // At alpha = 1 use 1/tau directly so the classical backward Euler system
    // is reproduced bit for bit.
    let tau_pow = if alpha == 1.0 {
        1.0 / tau
    } else {
        tau.powf(-alpha)
    };
    let mass = assemble_mass(mesh);
    let stiffness = assemble_stiffness(mesh);
    let system = mass.scaled_add(tau_pow * weights.beta(0), &stiffness)?;
    let factor = system.factorize()?;
    let mass_factor = mass.factorize()?;
    Ok(SystemFactor {
        tau_pow,
        mass,
        stiffness,
        system,
        factor,
        mass_factor,
    })
}

/// Forward march over steps 1..=N. `fill(k, buf)` must write the projected
/// data coefficients g^k for step k.
pub(crate) fn march_forward<G>(
    grid: &TimeGrid,
    factor: &SystemFactor,
    weights: &FracWeights,
    mut fill: G,
) -> Result<Trajectory>
where
    G: FnMut(usize, &mut [f64]) -> Result<()>,
{
    let m = factor.dim();
    let n_steps = grid.n_steps();
    let mut conv = HistoryAccum::auto(weights.betas().to_vec(), m, n_steps);
    let mut entries = Vec::with_capacity(n_steps + 1);
    entries.push(NodalFn::zeros(m));
    conv.push(&vec![0.0; m]);
    let mut g = vec![0.0; m];
    let mut mg = vec![0.0; m];
    let mut hist = vec![0.0; m];
    let mut mx = vec![0.0; m];
    for k in 1..=n_steps {
        fill(k, &mut g)?;
        factor.mass.apply_into(&g, &mut mg);
        conv.write_history(k, &mut hist);
        let mut x = vec![0.0; m];
        for i in 0..m {
            x[i] = mg[i] - factor.tau_pow * hist[i];
        }
        factor.factor.solve_in_place(&mut x);
        factor.mass.apply_into(&x, &mut mx);
        conv.push(&mx);
        entries.push(NodalFn::new(x));
    }
    Ok(Trajectory::from_parts(entries))
}

/// Backward march producing Z^0..Z^N with Z^N = 0. `fill(n, buf)` must write
/// the data coefficients attached to the equation for Z^(n-1), n = N..=1.
pub(crate) fn march_adjoint<G>(
    grid: &TimeGrid,
    factor: &SystemFactor,
    weights: &FracWeights,
    mut fill: G,
) -> Result<Trajectory>
where
    G: FnMut(usize, &mut [f64]) -> Result<()>,
{
    let m = factor.dim();
    let n_steps = grid.n_steps();
    let mut conv = HistoryAccum::auto(weights.betas().to_vec(), m, n_steps);
    let mut entries = vec![NodalFn::zeros(m); n_steps + 1];
    conv.push(&vec![0.0; m]);
    let mut g = vec![0.0; m];
    let mut mg = vec![0.0; m];
    let mut hist = vec![0.0; m];
    let mut mz = vec![0.0; m];
    for step in 1..=n_steps {
        let n = n_steps + 1 - step; // solving for Z^(n-1)
        fill(n, &mut g)?;
        factor.mass.apply_into(&g, &mut mg);
        conv.write_history(step, &mut hist);
        let mut z = vec![0.0; m];
        for i in 0..m {
            z[i] = mg[i] - factor.tau_pow * hist[i];
        }
        factor.factor.solve_in_place(&mut z);
        factor.mass.apply_into(&z, &mut mz);
        conv.push(&mz);
        entries[n - 1] = NodalFn::new(z);
    }
    Ok(Trajectory::from_parts(entries))
}

/// Writes the projected coefficients of the source at step `k` into `buf`.
pub(crate) fn project_source(
    mesh: &Mesh1D,
    grid: &TimeGrid,
    mass_factor: &TriFactor,
    source: &SourceSpec,
    k: usize,
    buf: &mut [f64],
) -> Result<()> {
    buf.fill(0.0);
    match source.kind {
        SourceKind::Pointwise => {
            let t = grid.time(k);
            add_load(mesh, |x| (source.f)(x, t), 1.0, buf).map_err(|e| attach_time(e, t))?;
        }
        SourceKind::Averaged => {
            // 3-point Gauss over (t_{k-1}, t_k); weights already average.
            let t0 = grid.time(k - 1);
            let tau = grid.tau();
            let s = 0.5 * (0.6f64).sqrt();
            for (xi, w) in [
                (0.5 - s, 5.0 / 18.0),
                (0.5, 8.0 / 18.0),
                (0.5 + s, 5.0 / 18.0),
            ] {
                let t = t0 + xi * tau;
                add_load(mesh, |x| (source.f)(x, t), w, buf).map_err(|e| attach_time(e, t))?;
            }
        }
    }
    mass_factor.solve_in_place(buf);
    Ok(())
}

fn attach_time(e: Error, t: f64) -> Error {
    match e {
        Error::NonFinite { x, .. } => Error::NonFinite { x, t },
        other => other,
    }
}

/// Solves the state equation with optional per-step control coefficients
/// Q^0..Q^(N-1); control Q^(n-1) acts on the step ending at t_n.
pub fn solve_forward(
    grid: &TimeGrid,
    mesh: &Mesh1D,
    weights: &FracWeights,
    source: &SourceSpec,
    control: Option<&[NodalFn]>,
) -> Result<Trajectory> {
    let factor = factor_system(mesh, grid, weights)?;
    let m = factor.dim();
    if let Some(q) = control {
        if q.len() != grid.n_steps() {
            return Err(Error::LengthMismatch {
                expected: grid.n_steps(),
                got: q.len(),
            });
        }
        for e in q {
            if e.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: e.len(),
                });
            }
        }
    }
    march_forward(grid, &factor, weights, |k, buf| {
        project_source(mesh, grid, factor.mass_factor(), source, k, buf)?;
        if let Some(q) = control {
            for (b, qv) in buf.iter_mut().zip(q[k - 1].values()) {
                *b += qv;
            }
        }
        Ok(())
    })
}

/// Solves the adjoint equation backward from Z^N = 0 with data
/// U^n - P_h(target(., t_n)) attached to the equation for Z^(n-1).
pub fn solve_adjoint(
    grid: &TimeGrid,
    mesh: &Mesh1D,
    weights: &FracWeights,
    state: &Trajectory,
    target: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<Trajectory> {
    let factor = factor_system(mesh, grid, weights)?;
    let m = factor.dim();
    if state.n_steps() != grid.n_steps() {
        return Err(Error::LengthMismatch {
            expected: grid.n_steps() + 1,
            got: state.n_steps() + 1,
        });
    }
    if state.width() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: state.width(),
        });
    }
    march_adjoint(grid, &factor, weights, |n, buf| {
        let t = grid.time(n);
        let proj = project_with(mesh, factor.mass_factor(), |x| target(x, t))
            .map_err(|e| attach_time(e, t))?;
        for (b, (u, d)) in buf
            .iter_mut()
            .zip(state.entry(n).values().iter().zip(proj.values()))
        {
            *b = u - d;
        }
        Ok(())
    })
}
