//! Independent cross-checks: a dense brute-force solver for tiny control
//! problems, a manufactured solution with known source, a classical backward
//! Euler heat solver for the order-one limit, and quadrature-based error
//! measurement against closed-form functions.
//!
//! Everything here is deliberately assembled through dense matrices and
//! element quadrature rather than the production kernels, so agreement
//! between the two routes is meaningful.

use crate::error::{Error, Result};
use crate::fem1d::NodalFn;
use crate::fracweights::FracWeights;
use crate::grid::{Mesh1D, TimeGrid};
use crate::ocp::OcpProblem;
use crate::subdiff::{SourceSpec, Trajectory};
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

/// Largest stacked control dimension the dense route accepts.
const DENSE_LIMIT: usize = 64;

/// Five-point Gauss rule on (0, 1); exact for degree-9 polynomials.
fn gauss5() -> [(f64, f64); 5] {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    [
        (0.5, 128.0 / 225.0 / 2.0),
        (0.5 - 0.5 * a, wa / 2.0),
        (0.5 + 0.5 * a, wa / 2.0),
        (0.5 - 0.5 * b, wb / 2.0),
        (0.5 + 0.5 * b, wb / 2.0),
    ]
}

/// Dense mass matrix assembled by element quadrature.
pub(crate) fn dense_mass(mesh: &Mesh1D) -> DMatrix<f64> {
    dense_gram(mesh, false)
}

/// Dense stiffness matrix assembled by element quadrature.
pub(crate) fn dense_stiffness(mesh: &Mesh1D) -> DMatrix<f64> {
    dense_gram(mesh, true)
}

fn dense_gram(mesh: &Mesh1D, derivatives: bool) -> DMatrix<f64> {
    let m = mesh.n_interior();
    let h = mesh.h();
    let mut out = DMatrix::zeros(m, m);
    for e in 0..mesh.cells() {
        // Local basis on element e: left hat 1 - xi, right hat xi.
        for (xi, w) in gauss5() {
            let (vl, vr) = if derivatives {
                (-1.0 / h, 1.0 / h)
            } else {
                (1.0 - xi, xi)
            };
            let nodes = [(e, vl), (e + 1, vr)];
            for (na, va) in nodes {
                if na == 0 || na == mesh.cells() {
                    continue;
                }
                for (nb, vb) in nodes {
                    if nb == 0 || nb == mesh.cells() {
                        continue;
                    }
                    out[(na - 1, nb - 1)] += w * h * va * vb;
                }
            }
        }
    }
    out
}

/// Dense load vector for `f` by element quadrature. Uses the same
/// three-point rule that defines the discrete data in the banded route, so
/// both routes consume the identical discrete problem; the independence
/// lives in the assembly, factorization, and marching code paths.
fn dense_load<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> DVector<f64> {
    let s = 0.5 * (0.6_f64).sqrt();
    let rule = [
        (0.5 - s, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + s, 5.0 / 18.0),
    ];
    let m = mesh.n_interior();
    let h = mesh.h();
    let mut out = DVector::zeros(m);
    for e in 0..mesh.cells() {
        let xl = mesh.node_x(e);
        for (xi, w) in rule {
            let x = xl + xi * h;
            let fx = f(x);
            if e > 0 {
                out[e - 1] += w * h * fx * (1.0 - xi);
            }
            if e + 1 < mesh.cells() {
                out[e] += w * h * fx * xi;
            }
        }
    }
    out
}

/// Shared dense discretization pieces for the brute-force routes.
struct DenseSystem {
    n: usize,
    m: usize,
    tau_pow: f64,
    betas: Vec<f64>,
    md: DMatrix<f64>,
    md_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    sys_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseSystem {
    fn build(prob: &OcpProblem) -> Result<Self> {
        let n = prob.grid.n_steps();
        let m = prob.mesh.n_interior();
        let weights = FracWeights::new(prob.scheme, prob.alpha, n)?;
        let md = dense_mass(&prob.mesh);
        let ad = dense_stiffness(&prob.mesh);
        let tau_pow = prob.grid.tau().powf(-prob.alpha);
        let sys = &md * tau_pow + &ad;
        Ok(Self {
            n,
            m,
            tau_pow,
            betas: weights.betas().to_vec(),
            md_lu: md.clone().lu(),
            md,
            sys_lu: sys.lu(),
        })
    }

    /// Dense march with per-step data `g(k)`, returning stacked states
    /// U^1..U^N as one vector of length n * m.
    fn march<G: Fn(usize) -> DVector<f64>>(&self, g: G) -> DVector<f64> {
        let mut states: Vec<DVector<f64>> = Vec::with_capacity(self.n);
        for k in 1..=self.n {
            let mut rhs = &self.md * g(k);
            for (p, u) in states.iter().enumerate() {
                let w = self.betas[k - 1 - p];
                rhs -= (&self.md * u) * (self.tau_pow * w);
            }
            states.push(self.sys_lu.solve(&rhs).expect("dense step solve"));
        }
        let mut out = DVector::zeros(self.n * self.m);
        for (p, u) in states.iter().enumerate() {
            out.rows_mut(p * self.m, self.m).copy_from(u);
        }
        out
    }

    /// Block-diagonal mass application on a stacked vector.
    fn apply_mass(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n * self.m);
        for p in 0..self.n {
            out.rows_mut(p * self.m, self.m)
                .copy_from(&(&self.md * v.rows(p * self.m, self.m)));
        }
        out
    }

    /// Block-diagonal mass solve on a stacked vector.
    fn solve_mass(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n * self.m);
        for p in 0..self.n {
            let slot = v.rows(p * self.m, self.m).into_owned();
            out.rows_mut(p * self.m, self.m)
                .copy_from(&self.md_lu.solve(&slot).expect("dense mass solve"));
        }
        out
    }

    /// Stacked projections of a space-time function at t_1..t_N.
    fn stacked_projection(
        &self,
        prob: &OcpProblem,
        f: &(dyn Fn(f64, f64) -> f64 + Sync),
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.n * self.m);
        for k in 1..=self.n {
            let t = prob.grid.time(k);
            let load = dense_load(&prob.mesh, |x| f(x, t));
            out.rows_mut((k - 1) * self.m, self.m)
                .copy_from(&self.md_lu.solve(&load).expect("dense projection"));
        }
        out
    }

    /// Control-to-state matrix: column (slot, node) is the stacked state
    /// response to a unit control there.
    fn control_to_state(&self) -> DMatrix<f64> {
        let size = self.n * self.m;
        let mut s = DMatrix::zeros(size, size);
        for col in 0..size {
            let slot = col / self.m;
            let node = col % self.m;
            let resp = self.march(|k| {
                let mut g = DVector::zeros(self.m);
                if k - 1 == slot {
                    g[node] = 1.0;
                }
                g
            });
            s.column_mut(col).copy_from(&resp);
        }
        s
    }
}

fn check_dense_size(prob: &OcpProblem) -> Result<usize> {
    let size = prob.grid.n_steps() * prob.mesh.n_interior();
    if size > DENSE_LIMIT {
        return Err(Error::SizeLimit {
            got: size,
            limit: DENSE_LIMIT,
        });
    }
    Ok(size)
}

/// Brute-force reference control: dense projected gradient on the reduced
/// quadratic objective, preconditioned by the block mass matrix so the
/// box projection acts nodewise. Runs until the update max-norm drops
/// below `tol`.
pub fn qp_oracle(prob: &OcpProblem, tol: f64, max_iter: usize) -> Result<Vec<NodalFn>> {
    let size = check_dense_size(prob)?;
    let sys = DenseSystem::build(prob)?;
    let s = sys.control_to_state();
    let uf = sys.march(|k| {
        let t = prob.grid.time(k);
        let load = dense_load(&prob.mesh, |x| (prob.f)(x, t));
        sys.md_lu.solve(&load).expect("dense projection")
    });
    let dvec = sys.stacked_projection(prob, prob.target);

    // Step length from a trace bound on the preconditioned Hessian part
    // M^{-1} S' M S; the trace dominates the largest eigenvalue.
    let ms = {
        let mut ms = s.clone();
        for c in 0..size {
            let col = ms.column(c).into_owned();
            ms.column_mut(c).copy_from(&sys.apply_mass(&col));
        }
        ms
    };
    let st_ms = s.transpose() * &ms;
    let mut trace = 0.0;
    for c in 0..size {
        let col = st_ms.column(c).into_owned();
        trace += sys.solve_mass(&col)[c];
    }
    let step = 1.0 / (prob.gamma + trace.max(0.0));

    let clamp = |x: f64| x.clamp(prob.bounds.lower, prob.bounds.upper);
    let mut q = DVector::from_element(size, clamp(0.0));
    let mut converged = false;
    for _ in 0..max_iter {
        let u = &s * &q + &uf;
        let z = sys.solve_mass(&(s.transpose() * sys.apply_mass(&(u - &dvec))));
        let mut qnew = DVector::zeros(size);
        let mut delta = 0.0f64;
        for i in 0..size {
            let gi = prob.gamma * q[i] + z[i];
            qnew[i] = clamp(q[i] - step * gi);
            delta = delta.max((qnew[i] - q[i]).abs());
        }
        q = qnew;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: max_iter,
            residual: f64::NAN,
        });
    }
    Ok((0..sys.n)
        .map(|p| NodalFn::new(q.rows(p * sys.m, sys.m).iter().copied().collect()))
        .collect())
}

/// Dense evaluation of the tracking objective for an arbitrary control,
/// marching the state with the dense system.
pub fn qp_objective(prob: &OcpProblem, control: &[NodalFn]) -> Result<f64> {
    check_dense_size(prob)?;
    let sys = DenseSystem::build(prob)?;
    if control.len() != sys.n {
        return Err(Error::LengthMismatch {
            expected: sys.n,
            got: control.len(),
        });
    }
    let u = sys.march(|k| {
        let t = prob.grid.time(k);
        let load = dense_load(&prob.mesh, |x| (prob.f)(x, t));
        let mut g = sys.md_lu.solve(&load).expect("dense projection");
        for (gi, qi) in g.iter_mut().zip(control[k - 1].values()) {
            *gi += qi;
        }
        g
    });
    let dvec = sys.stacked_projection(prob, prob.target);
    let diff = u - dvec;
    let track = diff.dot(&sys.apply_mass(&diff));
    let mut qstack = DVector::zeros(sys.n * sys.m);
    for (p, qn) in control.iter().enumerate() {
        for (i, v) in qn.values().iter().enumerate() {
            qstack[p * sys.m + i] = *v;
        }
    }
    let cost = qstack.dot(&sys.apply_mass(&qstack));
    Ok(0.5 * prob.grid.tau() * (track + prob.gamma * cost))
}

/// Classical backward Euler march for the heat equation (order one limit),
/// written as its own recursion: (M/tau + A) u^n = M g^n + M u^(n-1) / tau.
pub fn backward_euler_heat(
    grid: &TimeGrid,
    mesh: &Mesh1D,
    source: &SourceSpec,
) -> Result<Trajectory> {
    use crate::fem1d::{assemble_mass, assemble_stiffness};
    let m = mesh.n_interior();
    let tau_inv = 1.0 / grid.tau();
    let mass = assemble_mass(mesh);
    let system = mass.scaled_add(tau_inv, &assemble_stiffness(mesh))?;
    let factor = system.factorize()?;
    let mass_factor = mass.factorize()?;
    let mut entries = Vec::with_capacity(grid.n_steps() + 1);
    entries.push(NodalFn::zeros(m));
    let mut g = vec![0.0; m];
    let mut mg = vec![0.0; m];
    let mut mu = vec![0.0; m];
    for k in 1..=grid.n_steps() {
        crate::subdiff::project_source(mesh, grid, &mass_factor, source, k, &mut g)?;
        mass.apply_into(&g, &mut mg);
        mass.apply_into(entries[k - 1].values(), &mut mu);
        let mut x = vec![0.0; m];
        for i in 0..m {
            x[i] = mg[i] + tau_inv * mu[i];
        }
        factor.solve_in_place(&mut x);
        entries.push(NodalFn::new(x));
    }
    Trajectory::new(entries)
}

/// Manufactured case u(x, t) = t^2 sin(pi x) with the matching source for
/// a given fractional order.
pub struct ManufacturedCase {
    alpha: f64,
    /// Gamma(3) / Gamma(3 - alpha).
    deriv_coeff: f64,
}

/// Builds the manufactured case for `alpha` in (0, 1].
pub fn manufactured_t2(alpha: f64) -> Result<ManufacturedCase> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(ManufacturedCase {
        alpha,
        deriv_coeff: gamma(3.0) / gamma(3.0 - alpha),
    })
}

impl ManufacturedCase {
    /// Exact solution t^2 sin(pi x).
    pub fn solution(&self, x: f64, t: f64) -> f64 {
        t * t * (std::f64::consts::PI * x).sin()
    }

    /// Source whose solution is `solution`: the fractional time derivative
    /// of t^2 plus pi^2 t^2, both times sin(pi x).
    pub fn source(&self, x: f64, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let time_part = self.deriv_coeff * t.powf(2.0 - self.alpha) + pi * pi * t * t;
        time_part * (pi * x).sin()
    }

    /// Fractional order the case was built for.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// L2(0,1) distance between the P1 function with coefficients `v` and a
/// closed-form function, by per-element Gauss quadrature.
pub fn l2_error_vs_function<F: Fn(f64) -> f64>(
    mesh: &Mesh1D,
    v: &NodalFn,
    exact: F,
) -> Result<f64> {
    if v.len() != mesh.n_interior() {
        return Err(Error::LengthMismatch {
            expected: mesh.n_interior(),
            got: v.len(),
        });
    }
    let h = mesh.h();
    let vals = v.values();
    let node = |k: usize| -> f64 {
        if k == 0 || k == mesh.cells() {
            0.0
        } else {
            vals[k - 1]
        }
    };
    let mut acc = 0.0;
    for e in 0..mesh.cells() {
        let xl = mesh.node_x(e);
        let (a, b) = (node(e), node(e + 1));
        for (xi, w) in gauss5() {
            let x = xl + xi * h;
            let diff = (1.0 - xi) * a + xi * b - exact(x);
            acc += w * h * diff * diff;
        }
    }
    Ok(acc.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::{assemble_mass, assemble_stiffness, l2_project};
    use crate::fracweights::Scheme;
    use crate::ocp::{objective, solve_ocp, Bounds};
    use crate::subdiff::solve_forward;

    #[test]
    fn dense_assembly_matches_banded_assembly() {
        // Quadrature route vs closed-form bands.
        for cells in [2usize, 5, 16] {
            let mesh = Mesh1D::new(cells).unwrap();
            let md = dense_mass(&mesh);
            let ad = dense_stiffness(&mesh);
            let mb = assemble_mass(&mesh);
            let ab = assemble_stiffness(&mesh);
            for i in 0..mesh.n_interior() {
                for j in 0..mesh.n_interior() {
                    let want_m = if i == j {
                        mb.diag()[i]
                    } else if j + 1 == i {
                        mb.sub()[j]
                    } else if i + 1 == j {
                        mb.sup()[i]
                    } else {
                        0.0
                    };
                    assert!((md[(i, j)] - want_m).abs() < 1e-14, "mass ({i},{j})");
                    let want_a = if i == j {
                        ab.diag()[i]
                    } else if (i as i64 - j as i64).abs() == 1 {
                        -(cells as f64)
                    } else {
                        0.0
                    };
                    assert!((ad[(i, j)] - want_a).abs() < 1e-11, "stiff ({i},{j})");
                }
            }
        }
    }

    fn tiny_problem<'a>(
        f: &'a (dyn Fn(f64, f64) -> f64 + Sync),
        ud: &'a (dyn Fn(f64, f64) -> f64 + Sync),
        n: usize,
        m: usize,
        alpha: f64,
    ) -> OcpProblem<'a> {
        OcpProblem {
            grid: TimeGrid::new(n, 0.1).unwrap(),
            mesh: Mesh1D::new(m).unwrap(),
            scheme: Scheme::L1,
            alpha,
            gamma: 1.0,
            bounds: Bounds {
                lower: 0.0,
                upper: 0.05,
            },
            f,
            target: ud,
        }
    }

    #[test]
    fn qp_oracle_agrees_with_fixed_point_solver_on_a_tiny_case() {
        let f: &(dyn Fn(f64, f64) -> f64 + Sync) = &|_x, _t| 0.0;
        let ud: &(dyn Fn(f64, f64) -> f64 + Sync) = &|x, t| t.exp() * x * (1.0 - x);
        let prob = tiny_problem(f, ud, 4, 4, 0.5);
        let oracle = qp_oracle(&prob, 1e-12, 200_000).unwrap();
        let sol = solve_ocp(&prob, 1e-12, 500, 1.0).unwrap();
        for (a, b) in oracle.iter().zip(&sol.control) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn qp_oracle_rejects_large_problems() {
        let f: &(dyn Fn(f64, f64) -> f64 + Sync) = &|_x, _t| 0.0;
        let prob = tiny_problem(f, f, 10, 10, 0.5);
        assert!(matches!(
            qp_oracle(&prob, 1e-10, 100),
            Err(Error::SizeLimit { got: 90, limit: 64 })
        ));
    }

    #[test]
    fn objective_routes_agree() {
        let f: &(dyn Fn(f64, f64) -> f64 + Sync) = &|x, t| (x + t).sin();
        let ud: &(dyn Fn(f64, f64) -> f64 + Sync) = &|x, t| t.exp() * x * (1.0 - x);
        let prob = tiny_problem(f, ud, 5, 5, 0.6);
        let control: Vec<NodalFn> = (0..5)
            .map(|n| NodalFn::new((0..4).map(|i| 0.01 * ((n + i) as f64).sin()).collect()))
            .collect();
        let w = FracWeights::new(prob.scheme, prob.alpha, 5).unwrap();
        let state = solve_forward(
            &prob.grid,
            &prob.mesh,
            &w,
            &SourceSpec::pointwise(prob.f),
            Some(&control),
        )
        .unwrap();
        let lhs = objective(&prob, &state, &control).unwrap();
        let rhs = qp_objective(&prob, &control).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.max(1e-30),
            "{lhs:.17e} vs {rhs:.17e}"
        );
    }

    #[test]
    fn heat_oracle_matches_fractional_solver_at_order_one() {
        let grid = TimeGrid::new(16, 0.1).unwrap();
        let mesh = Mesh1D::new(8).unwrap();
        let f: &(dyn Fn(f64, f64) -> f64 + Sync) =
            &|x: f64, t: f64| (3.0 * x).sin() * (1.0 + t) + x;
        let src = SourceSpec::pointwise(f);
        let heat = backward_euler_heat(&grid, &mesh, &src).unwrap();
        for scheme in [Scheme::L1, Scheme::BeCq] {
            let w = FracWeights::new(scheme, 1.0, 16).unwrap();
            let frac = solve_forward(&grid, &mesh, &w, &src, None).unwrap();
            for n in 0..=16 {
                for (a, b) in frac.entry(n).values().iter().zip(heat.entry(n).values()) {
                    assert!(
                        (a - b).abs() <= 1e-13 * (1.0 + b.abs()),
                        "{scheme:?} step {n}: {a:.17e} vs {b:.17e}"
                    );
                }
            }
        }
    }

    #[test]
    fn manufactured_source_reduces_to_heat_at_order_one() {
        let case = manufactured_t2(1.0).unwrap();
        // At alpha = 1 the time part is 2t + pi^2 t^2.
        let pi = std::f64::consts::PI;
        let got = case.source(0.5, 0.3);
        let want = (2.0 * 0.3 + pi * pi * 0.09) * (pi * 0.5).sin();
        assert!((got - want).abs() < 1e-14);
        assert!(manufactured_t2(0.0).is_err());
        assert!(manufactured_t2(1.2).is_err());
    }

    #[test]
    fn manufactured_march_converges_first_order_in_time_for_cq() {
        // With the backward Euler quadrature the time error is O(tau).
        let case = manufactured_t2(0.5).unwrap();
        let mesh = Mesh1D::new(64).unwrap();
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let grid = TimeGrid::new(n, 1.0).unwrap();
            let w = FracWeights::new(Scheme::BeCq, 0.5, n).unwrap();
            let f = |x: f64, t: f64| case.source(x, t);
            let src = SourceSpec::pointwise(&f);
            let u = solve_forward(&grid, &mesh, &w, &src, None).unwrap();
            let err = (1..=n)
                .map(|k| {
                    l2_error_vs_function(&mesh, u.entry(k), |x| case.solution(x, grid.time(k)))
                        .unwrap()
                })
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (1.6..=2.4).contains(&ratio),
            "time error ratio {ratio} (errors {errs:?})"
        );
    }

    #[test]
    fn quadrature_error_measure_tracks_interpolation_order() {
        let f = |x: f64| (std::f64::consts::PI * x).sin();
        let mut errs = Vec::new();
        for &cells in &[16usize, 32] {
            let mesh = Mesh1D::new(cells).unwrap();
            let v = l2_project(&mesh, f).unwrap();
            errs.push(l2_error_vs_function(&mesh, &v, f).unwrap());
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.6..=4.4).contains(&ratio),
            "projection error ratio {ratio}"
        );
    }
}
