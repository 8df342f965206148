//! Box-constrained tracking control of the subdiffusion equation: the
//! discrete objective, the damped projected fixed-point solver driven by
//! forward/adjoint sweeps, and the first-order residual used to measure
//! optimality.

use crate::error::{Error, Result};
use crate::fem1d::{l2_norm_slice, project_with, NodalFn, TriDiag};
use crate::fracweights::FracWeights;
use crate::grid::{Mesh1D, TimeGrid};
use crate::subdiff::{
    factor_system, march_adjoint, march_forward, project_source, SourceSpec, SystemFactor,
    Trajectory,
};

/// Pointwise admissible band lower <= q <= upper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    /// Lower bound a.
    pub lower: f64,
    /// Upper bound b.
    pub upper: f64,
}

impl Bounds {
    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::InvalidArgument(format!(
                "bounds must satisfy lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// Tracking problem: steer the state toward `target` at quadratic control
/// cost `gamma`, with the control confined to `bounds`.
pub struct OcpProblem<'a> {
    /// Time discretization.
    pub grid: TimeGrid,
    /// Spatial mesh.
    pub mesh: Mesh1D,
    /// Time-stepping scheme.
    pub scheme: crate::fracweights::Scheme,
    /// Fractional order in (0, 1].
    pub alpha: f64,
    /// Control cost weight, positive.
    pub gamma: f64,
    /// Admissible control band.
    pub bounds: Bounds,
    /// Fixed source term f(x, t).
    pub f: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    /// Desired state trajectory u_d(x, t).
    pub target: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

/// Converged solver output.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// State trajectory U^0..U^N for the returned control.
    pub state: Trajectory,
    /// Adjoint trajectory Z^0..Z^N for the returned state.
    pub adjoint: Trajectory,
    /// Control Q^0..Q^(N-1); Q^(n-1) acts on the step ending at t_n.
    pub control: Vec<NodalFn>,
    /// Objective value at the returned triple.
    pub objective: f64,
    /// Fixed-point sweeps performed.
    pub iterations: usize,
    /// First-order residual max_n ||Q - clamp(-Z/gamma)|| at the solution.
    pub residual: f64,
}

/// Nodewise projection onto the admissible band.
pub fn clamp_project(v: &NodalFn, bounds: &Bounds) -> NodalFn {
    NodalFn::new(v.values().iter().map(|&x| bounds.clamp(x)).collect())
}

/// Time-summed mass inner product tau * sum_k (v_k, M w_k).
pub fn discrete_inner(tau: f64, mass: &TriDiag, v: &[NodalFn], w: &[NodalFn]) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: v.len(),
            got: w.len(),
        });
    }
    let mut total = 0.0;
    let mut mw = vec![0.0; mass.dim()];
    for (a, b) in v.iter().zip(w) {
        if a.len() != mass.dim() || b.len() != mass.dim() {
            return Err(Error::LengthMismatch {
                expected: mass.dim(),
                got: a.len().min(b.len()),
            });
        }
        mass.apply_into(b.values(), &mut mw);
        total += a.values().iter().zip(&mw).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(tau * total)
}

/// Norm induced by `discrete_inner`.
pub fn discrete_norm(tau: f64, mass: &TriDiag, v: &[NodalFn]) -> Result<f64> {
    Ok(discrete_inner(tau, mass, v, v)?.max(0.0).sqrt())
}

/// Precomputed per-problem data shared by the solver entry points.
struct Prepared {
    weights: FracWeights,
    factor: SystemFactor,
    /// Projected source coefficients at t_1..t_N.
    fh: Vec<NodalFn>,
    /// Projected target coefficients at t_1..t_N.
    dd: Vec<NodalFn>,
}

fn prepare(prob: &OcpProblem) -> Result<Prepared> {
    if !(prob.gamma.is_finite() && prob.gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {}",
            prob.gamma
        )));
    }
    prob.bounds.validate()?;
    let n = prob.grid.n_steps();
    let weights = FracWeights::new(prob.scheme, prob.alpha, n)?;
    let factor = factor_system(&prob.mesh, &prob.grid, &weights)?;
    let m = factor.dim();
    let src = SourceSpec::pointwise(prob.f);
    let mut fh = Vec::with_capacity(n);
    let mut dd = Vec::with_capacity(n);
    for k in 1..=n {
        let mut buf = vec![0.0; m];
        project_source(
            &prob.mesh,
            &prob.grid,
            factor_mass(&factor),
            &src,
            k,
            &mut buf,
        )?;
        fh.push(NodalFn::new(buf));
        let t = prob.grid.time(k);
        dd.push(project_with(&prob.mesh, factor_mass(&factor), |x| {
            (prob.target)(x, t)
        })?);
    }
    Ok(Prepared {
        weights,
        factor,
        fh,
        dd,
    })
}

fn factor_mass(factor: &SystemFactor) -> &crate::fem1d::TriFactor {
    factor.mass_factor()
}

fn forward_from(prep: &Prepared, prob: &OcpProblem, q: &[NodalFn]) -> Result<Trajectory> {
    march_forward(&prob.grid, &prep.factor, &prep.weights, |k, buf| {
        for (b, (f, qv)) in buf
            .iter_mut()
            .zip(prep.fh[k - 1].values().iter().zip(q[k - 1].values()))
        {
            *b = f + qv;
        }
        Ok(())
    })
}

fn adjoint_from(prep: &Prepared, prob: &OcpProblem, state: &Trajectory) -> Result<Trajectory> {
    march_adjoint(&prob.grid, &prep.factor, &prep.weights, |n, buf| {
        for (b, (u, d)) in buf
            .iter_mut()
            .zip(state.entry(n).values().iter().zip(prep.dd[n - 1].values()))
        {
            *b = u - d;
        }
        Ok(())
    })
}

/// max_n || Q^(n-1) - clamp(-Z^(n-1) / gamma) || over the control slots.
fn control_gap(prob: &OcpProblem, q: &[NodalFn], z: &Trajectory) -> f64 {
    let h = prob.mesh.h();
    let inv_gamma = 1.0 / prob.gamma;
    let mut worst = 0.0f64;
    let mut diff = vec![0.0; z.width()];
    for (n, qn) in q.iter().enumerate() {
        for (d, (qv, zv)) in diff
            .iter_mut()
            .zip(qn.values().iter().zip(z.entry(n).values()))
        {
            *d = qv - prob.bounds.clamp(-zv * inv_gamma);
        }
        worst = worst.max(l2_norm_slice(h, &diff));
    }
    worst
}

/// Objective (tau/2) sum_n ||U^n - P_h u_d(t_n)||^2 + gamma/2 * |||Q|||^2.
pub fn objective(prob: &OcpProblem, state: &Trajectory, control: &[NodalFn]) -> Result<f64> {
    let prep = prepare(prob)?;
    if state.n_steps() != prob.grid.n_steps() || control.len() != prob.grid.n_steps() {
        return Err(Error::LengthMismatch {
            expected: prob.grid.n_steps(),
            got: state.n_steps().min(control.len()),
        });
    }
    Ok(objective_with(&prep, prob, state, control))
}

fn objective_with(
    prep: &Prepared,
    prob: &OcpProblem,
    state: &Trajectory,
    control: &[NodalFn],
) -> f64 {
    let h = prob.mesh.h();
    let tau = prob.grid.tau();
    let mut track = 0.0;
    let mut cost = 0.0;
    let mut diff = vec![0.0; state.width()];
    for n in 1..=prob.grid.n_steps() {
        for (d, (u, t)) in diff
            .iter_mut()
            .zip(state.entry(n).values().iter().zip(prep.dd[n - 1].values()))
        {
            *d = u - t;
        }
        let e = l2_norm_slice(h, &diff);
        track += e * e;
        let qn = l2_norm_slice(h, control[n - 1].values());
        cost += qn * qn;
    }
    0.5 * tau * (track + prob.gamma * cost)
}

/// Solves the control problem by damped projected fixed-point iteration on
/// Q = clamp(-Z/gamma). `damping` in (0, 1] is the initial relaxation
/// weight; it is halved once if the update norm ever grows.
pub fn solve_ocp(
    prob: &OcpProblem,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<OcpSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let prep = prepare(prob)?;
    let n = prob.grid.n_steps();
    let m = prep.factor.dim();
    let h = prob.mesh.h();
    let tau = prob.grid.tau();
    let inv_gamma = 1.0 / prob.gamma;

    let flat = prob.bounds.clamp(0.0);
    let mut q: Vec<NodalFn> = (0..n).map(|_| NodalFn::new(vec![flat; m])).collect();

    let mut omega = damping;
    let mut prev_delta = f64::INFINITY;
    let mut converged_at = None;
    let mut last_delta = f64::NAN;
    let mut scratch = vec![0.0; m];

    for it in 1..=max_iter {
        let state = forward_from(&prep, prob, &q)?;
        let adj = adjoint_from(&prep, prob, &state)?;
        // In-place relaxed update toward clamp(-Z/gamma), accumulating the
        // squared update norm and the squared new control norm as we go.
        let mut delta_sq = 0.0;
        let mut qnorm_sq = 0.0;
        for (slot, zn) in q.iter_mut().zip(adj.entries()) {
            let qv = slot.values_mut();
            for (s, (qi, zi)) in scratch.iter_mut().zip(qv.iter().zip(zn.values())) {
                *s = omega * (prob.bounds.clamp(-zi * inv_gamma) - qi);
            }
            let dn = l2_norm_slice(h, &scratch);
            delta_sq += dn * dn;
            for (qi, s) in qv.iter_mut().zip(&scratch) {
                *qi += s;
            }
            let nn = l2_norm_slice(h, qv);
            qnorm_sq += nn * nn;
        }
        let delta = (tau * delta_sq).sqrt();
        let qnorm = (tau * qnorm_sq).sqrt();
        last_delta = delta;
        if delta <= tol * qnorm.max(1.0) {
            converged_at = Some(it);
            break;
        }
        if delta > prev_delta {
            omega = omega.min(0.5);
        }
        prev_delta = delta;
    }

    let iterations = converged_at.ok_or(Error::NoConvergence {
        iterations: max_iter,
        residual: last_delta,
    })?;

    let state = forward_from(&prep, prob, &q)?;
    let adjoint = adjoint_from(&prep, prob, &state)?;
    let residual = control_gap(prob, &q, &adjoint);
    let objective = objective_with(&prep, prob, &state, &q);
    Ok(OcpSolution {
        state,
        adjoint,
        control: q,
        objective,
        iterations,
        residual,
    })
}

/// First-order residual of an arbitrary feasible control: re-solves the
/// state and adjoint for `control` and measures the gap to the clamped map.
pub fn kkt_residual(prob: &OcpProblem, control: &[NodalFn]) -> Result<f64> {
    let prep = prepare(prob)?;
    if control.len() != prob.grid.n_steps() {
        return Err(Error::LengthMismatch {
            expected: prob.grid.n_steps(),
            got: control.len(),
        });
    }
    let state = forward_from(&prep, prob, control)?;
    let adj = adjoint_from(&prep, prob, &state)?;
    Ok(control_gap(prob, control, &adj))
}
