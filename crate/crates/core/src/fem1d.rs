//! Piecewise-linear finite elements on a uniform mesh of (0, 1) with
//! homogeneous Dirichlet ends: tridiagonal mass/stiffness assembly, a cached
//! Thomas factorization, L2 projection, norms, and nested-mesh transfer.

use crate::error::{Error, Result};
use crate::grid::{Mesh1D, NestingMap};

/// Coefficient vector with respect to the interior hat-function basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFn {
    values: Vec<f64>,
}

impl NodalFn {
    /// Wraps a coefficient vector.
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// All-zero coefficients of length `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    /// Number of coefficients.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when there are no coefficients.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficients as a slice.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the coefficients.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Consumes the wrapper and returns the raw vector.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Symmetric-profile tridiagonal matrix stored as three bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TriDiag {
    /// Builds a matrix from its bands; `sub` and `sup` must be one entry
    /// shorter than `diag`.
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("diagonal must be non-empty".into()));
        }
        if sub.len() + 1 != diag.len() || sup.len() + 1 != diag.len() {
            return Err(Error::LengthMismatch {
                expected: diag.len() - 1,
                got: sub.len().max(sup.len()),
            });
        }
        Ok(Self { sub, diag, sup })
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Subdiagonal band.
    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    /// Main diagonal.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Superdiagonal band.
    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Matrix-vector product into `out`.
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Returns `c * self + other`.
    pub fn scaled_add(&self, c: f64, other: &TriDiag) -> Result<TriDiag> {
        if other.dim() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let comb = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| c * x + y).collect()
        };
        Ok(TriDiag {
            sub: comb(&self.sub, &other.sub),
            diag: comb(&self.diag, &other.diag),
            sup: comb(&self.sup, &other.sup),
        })
    }

    /// LU factorization without pivoting (safe for diagonally dominant
    /// systems); fails with `SingularPivot` if elimination breaks down.
    pub fn factorize(&self) -> Result<TriFactor> {
        let n = self.dim();
        let mut low = vec![0.0; n.saturating_sub(1)];
        let mut inv_diag = vec![0.0; n];
        let mut piv = self.diag[0];
        if !piv.is_finite() || piv.abs() < f64::MIN_POSITIVE {
            return Err(Error::SingularPivot { row: 0 });
        }
        inv_diag[0] = 1.0 / piv;
        for i in 1..n {
            let l = self.sub[i - 1] * inv_diag[i - 1];
            low[i - 1] = l;
            piv = self.diag[i] - l * self.sup[i - 1];
            if !piv.is_finite() || piv.abs() < f64::MIN_POSITIVE {
                return Err(Error::SingularPivot { row: i });
            }
            inv_diag[i] = 1.0 / piv;
        }
        Ok(TriFactor {
            low,
            inv_diag,
            sup: self.sup.clone(),
        })
    }
}

/// Cached Thomas factorization; one `solve` per right-hand side.
#[derive(Debug, Clone)]
pub struct TriFactor {
    low: Vec<f64>,
    inv_diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TriFactor {
    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    /// Solves in place, overwriting `b` with the solution.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 1..n {
            b[i] -= self.low[i - 1] * b[i - 1];
        }
        b[n - 1] *= self.inv_diag[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.sup[i] * b[i + 1]) * self.inv_diag[i];
        }
    }

    /// Solves for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

/// One-shot tridiagonal solve (factorize + back substitution).
pub fn thomas_solve(matrix: &TriDiag, rhs: &[f64]) -> Result<Vec<f64>> {
    matrix.factorize()?.solve(rhs)
}

/// Mass matrix for interior hat functions: h/6 * tridiag(1, 4, 1).
pub fn assemble_mass(mesh: &Mesh1D) -> TriDiag {
    let n = mesh.n_interior();
    let h = mesh.h();
    TriDiag {
        sub: vec![h / 6.0; n - 1],
        diag: vec![2.0 * h / 3.0; n],
        sup: vec![h / 6.0; n - 1],
    }
}

/// Stiffness matrix for interior hat functions: 1/h * tridiag(-1, 2, -1).
pub fn assemble_stiffness(mesh: &Mesh1D) -> TriDiag {
    let n = mesh.n_interior();
    let h = mesh.h();
    TriDiag {
        sub: vec![-1.0 / h; n - 1],
        diag: vec![2.0 / h; n],
        sup: vec![-1.0 / h; n - 1],
    }
}

/// Three-point Gauss rule on the reference element (0, 1); exact for cubics.
fn gauss3() -> [(f64, f64); 3] {
    let s = 0.5 * (0.6f64).sqrt();
    [
        (0.5 - s, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + s, 5.0 / 18.0),
    ]
}

/// Accumulates the load vector b_i = integral of f * phi_i, element by
/// element with the 3-point Gauss rule. `out` must hold `n_interior` zeros
/// or previous partial sums; entries are added, not overwritten.
pub(crate) fn add_load<F: Fn(f64) -> f64>(
    mesh: &Mesh1D,
    f: F,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    let m = mesh.cells();
    debug_assert_eq!(out.len(), m - 1);
    let h = mesh.h();
    for e in 0..m {
        let x_left = mesh.node_x(e);
        for (xi, w) in gauss3() {
            let x = x_left + xi * h;
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFinite { x, t: f64::NAN });
            }
            let contrib = scale * w * h * fx;
            // Left node of element e is mesh node e, right node is e + 1;
            // interior node k corresponds to coefficient k - 1.
            if e > 0 {
                out[e - 1] += contrib * (1.0 - xi);
            }
            if e + 1 < m {
                out[e] += contrib * xi;
            }
        }
    }
    Ok(())
}

/// L2 projection of `f` onto the interior hat space using a precomputed
/// mass factorization.
pub(crate) fn project_with<F: Fn(f64) -> f64>(
    mesh: &Mesh1D,
    mass_factor: &TriFactor,
    f: F,
) -> Result<NodalFn> {
    let mut b = vec![0.0; mesh.n_interior()];
    add_load(mesh, f, 1.0, &mut b)?;
    mass_factor.solve_in_place(&mut b);
    Ok(NodalFn::new(b))
}

/// L2 projection of `f` onto the interior hat space.
pub fn l2_project<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> Result<NodalFn> {
    let factor = assemble_mass(mesh).factorize()?;
    project_with(mesh, &factor, f)
}

/// Mass-weighted norm sqrt(v' M v) computed directly from the band profile.
pub(crate) fn l2_norm_slice(h: f64, v: &[f64]) -> f64 {
    let mut sq = 0.0;
    let mut cross = 0.0;
    for i in 0..v.len() {
        sq += v[i] * v[i];
        if i + 1 < v.len() {
            cross += v[i] * v[i + 1];
        }
    }
    let val = (h / 6.0) * (4.0 * sq + 2.0 * cross);
    val.max(0.0).sqrt()
}

/// L2(0,1) norm of the function with coefficients `v`.
pub fn l2_norm(mesh: &Mesh1D, v: &NodalFn) -> Result<f64> {
    if v.len() != mesh.n_interior() {
        return Err(Error::LengthMismatch {
            expected: mesh.n_interior(),
            got: v.len(),
        });
    }
    Ok(l2_norm_slice(mesh.h(), v.values()))
}

/// Re-expresses a coarse-mesh function on a nested fine mesh. The result
/// represents the same piecewise-linear function.
pub fn prolong(coarse: &Mesh1D, v: &NodalFn, fine: &Mesh1D) -> Result<NodalFn> {
    if v.len() != coarse.n_interior() {
        return Err(Error::LengthMismatch {
            expected: coarse.n_interior(),
            got: v.len(),
        });
    }
    let map = NestingMap::between(coarse.cells(), fine.cells())?;
    let r = map.ratio();
    let vals = v.values();
    let coarse_node = |k: usize| -> f64 {
        // Mesh node k of the coarse mesh; boundary values are zero.
        if k == 0 || k == coarse.cells() {
            0.0
        } else {
            vals[k - 1]
        }
    };
    let mut out = vec![0.0; fine.n_interior()];
    for (j, slot) in out.iter_mut().enumerate() {
        let fine_node = j + 1;
        let k = fine_node / r;
        let rem = fine_node % r;
        *slot = if rem == 0 {
            coarse_node(k)
        } else {
            let frac = rem as f64 / r as f64;
            (1.0 - frac) * coarse_node(k) + frac * coarse_node(k + 1)
        };
    }
    Ok(NodalFn::new(out))
}

/// L2(0,1) distance between two functions on the same mesh.
pub fn l2_diff(mesh: &Mesh1D, a: &NodalFn, b: &NodalFn) -> Result<f64> {
    if a.len() != mesh.n_interior() || b.len() != mesh.n_interior() {
        return Err(Error::LengthMismatch {
            expected: mesh.n_interior(),
            got: a.len().min(b.len()),
        });
    }
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    Ok(l2_norm_slice(mesh.h(), &diff))
}

/// L2 distance between a coarse-mesh function and a fine-mesh function on
/// nested meshes, measured on the fine mesh.
pub fn l2_diff_nested(
    coarse: &Mesh1D,
    v_coarse: &NodalFn,
    fine: &Mesh1D,
    v_fine: &NodalFn,
) -> Result<f64> {
    if v_fine.len() != fine.n_interior() {
        return Err(Error::LengthMismatch {
            expected: fine.n_interior(),
            got: v_fine.len(),
        });
    }
    let lifted = prolong(coarse, v_coarse, fine)?;
    let diff: Vec<f64> = lifted
        .values()
        .iter()
        .zip(v_fine.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(l2_norm_slice(fine.h(), &diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh(cells: usize) -> Mesh1D {
        Mesh1D::new(cells).unwrap()
    }

    #[test]
    fn mass_entries_m2() {
        let m = assemble_mass(&mesh(2));
        assert_eq!(m.dim(), 1);
        assert!((m.diag()[0] - 1.0 / 3.0).abs() < 1e-16);
        assert!(m.sub().is_empty() && m.sup().is_empty());
    }

    #[test]
    fn stiffness_entries_m2() {
        let a = assemble_stiffness(&mesh(2));
        assert_eq!(a.diag()[0], 4.0);
    }

    #[test]
    fn mass_entries_m4() {
        let m = assemble_mass(&mesh(4));
        assert_eq!(m.dim(), 3);
        for d in m.diag() {
            assert!((d - 1.0 / 6.0).abs() < 1e-16);
        }
        for o in m.sub().iter().chain(m.sup()) {
            assert!((o - 1.0 / 24.0).abs() < 1e-17);
        }
    }

    #[test]
    fn stiffness_entries_m4() {
        let a = assemble_stiffness(&mesh(4));
        for d in a.diag() {
            assert_eq!(*d, 8.0);
        }
        for o in a.sub().iter().chain(a.sup()) {
            assert_eq!(*o, -4.0);
        }
    }

    #[test]
    fn tridiag_rejects_bad_bands() {
        assert!(TriDiag::new(vec![], vec![], vec![]).is_err());
        assert!(TriDiag::new(vec![1.0], vec![2.0], vec![]).is_err());
        assert!(TriDiag::new(vec![], vec![1.0, 2.0], vec![0.5]).is_err());
    }

    #[test]
    fn thomas_matches_hand_solution() {
        // [2 1; 1 2] x = [3; 3] has solution [1; 1].
        let t = TriDiag::new(vec![1.0], vec![2.0, 2.0], vec![1.0]).unwrap();
        let x = thomas_solve(&t, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn factor_detects_singular_matrix() {
        // Second pivot vanishes: diag 1, sub 1, sup 1 -> d2' = 1 - 1*1 = 0.
        let t = TriDiag::new(vec![1.0], vec![1.0, 1.0], vec![1.0]).unwrap();
        match t.factorize() {
            Err(Error::SingularPivot { row }) => assert_eq!(row, 1),
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn scaled_add_combines_bands() {
        let msh = mesh(4);
        let m = assemble_mass(&msh);
        let a = assemble_stiffness(&msh);
        let s = m.scaled_add(10.0, &a).unwrap();
        assert!((s.diag()[0] - (10.0 / 6.0 + 8.0)).abs() < 1e-14);
        assert!((s.sub()[0] - (10.0 / 24.0 - 4.0)).abs() < 1e-14);
    }

    #[test]
    fn apply_checks_length() {
        let m = assemble_mass(&mesh(4));
        assert!(m.apply(&[1.0, 2.0]).is_err());
        assert!(m.apply(&[1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn sin_interpolant_norm() {
        // ||sin(pi x)||_{L2} = sqrt(1/2); the interpolant agrees to O(h^2).
        let msh = mesh(1280);
        let vals: Vec<f64> = (0..msh.n_interior())
            .map(|i| (std::f64::consts::PI * msh.interior_x(i)).sin())
            .collect();
        let norm = l2_norm(&msh, &NodalFn::new(vals)).unwrap();
        assert!(
            (norm - 0.5f64.sqrt()).abs() < 1e-6,
            "norm {norm} vs sqrt(1/2)"
        );
    }

    #[test]
    fn projection_reproduces_hat_space() {
        // Projecting a function already in the space returns its coefficients.
        let msh = mesh(16);
        let coeffs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).sin()).collect();
        let lifted = |x: f64| eval_p1(&msh, &coeffs, x);
        let proj = l2_project(&msh, lifted).unwrap();
        for (a, b) in proj.values().iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn projection_nodal_deviation_for_parabola() {
        // For f = x(1-x) the projection's nodal values sit h^2/6 away from f
        // in the interior (up to ~h^2/5 next to the boundary).
        let msh = mesh(1280);
        let proj = l2_project(&msh, |x| x * (1.0 - x)).unwrap();
        let h2 = msh.h() * msh.h();
        let mut max_dev: f64 = 0.0;
        for i in 0..msh.n_interior() {
            let x = msh.interior_x(i);
            max_dev = max_dev.max((proj.values()[i] - x * (1.0 - x)).abs());
        }
        assert!(
            max_dev > 0.9 * h2 / 6.0 && max_dev < 1.5 * h2 / 6.0,
            "nodal deviation {max_dev:.3e} outside the expected h^2/6 band"
        );
    }

    #[test]
    fn projection_rejects_non_finite_sources() {
        let msh = mesh(8);
        let res = l2_project(&msh, |x| if x > 0.4 { f64::NAN } else { 1.0 });
        assert!(matches!(res, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn prolong_is_exact_on_nested_meshes() {
        let coarse = mesh(10);
        let fine = mesh(1280);
        let v = NodalFn::new((0..9).map(|i| (i as f64).cos()).collect());
        let lifted = prolong(&coarse, &v, &fine).unwrap();
        // Same piecewise-linear function, so the nested difference vanishes.
        let d = l2_diff_nested(&coarse, &v, &fine, &lifted).unwrap();
        assert!(d <= 1e-14, "self-distance {d}");
        // Norms agree across representations.
        let nc = l2_norm(&coarse, &v).unwrap();
        let nf = l2_norm(&fine, &lifted).unwrap();
        assert!((nc - nf).abs() < 1e-13 * nc.max(1.0));
    }

    #[test]
    fn prolong_requires_nesting() {
        let coarse = mesh(3);
        let fine = mesh(1280);
        let v = NodalFn::zeros(2);
        assert!(matches!(
            prolong(&coarse, &v, &fine),
            Err(Error::NotNested { .. })
        ));
    }

    #[test]
    fn norm_checks_length() {
        let msh = mesh(8);
        assert!(l2_norm(&msh, &NodalFn::zeros(3)).is_err());
        assert_eq!(l2_norm(&msh, &NodalFn::zeros(7)).unwrap(), 0.0);
    }

    /// Evaluates the P1 function with interior coefficients `c` at `x`.
    fn eval_p1(mesh: &Mesh1D, c: &[f64], x: f64) -> f64 {
        let m = mesh.cells();
        let e = ((x * m as f64).floor() as usize).min(m - 1);
        let xi = x * m as f64 - e as f64;
        let left = if e == 0 { 0.0 } else { c[e - 1] };
        let right = if e + 1 == m { 0.0 } else { c[e] };
        left * (1.0 - xi) + right * xi
    }

    proptest! {
        #[test]
        fn mass_is_positive_definite(
            cells in 2usize..40,
            seed in any::<u64>(),
        ) {
            let msh = mesh(cells);
            let mut state = seed | 1;
            let v: Vec<f64> = (0..msh.n_interior())
                .map(|_| {
                    // xorshift keeps the case generation self-contained
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state % 2000) as f64 / 1000.0 - 1.0
                })
                .collect();
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
            let m = assemble_mass(&msh);
            let mv = m.apply(&v).unwrap();
            let energy: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
            prop_assert!(energy > 0.0);
            let a = assemble_stiffness(&msh);
            let av = a.apply(&v).unwrap();
            let senergy: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            prop_assert!(senergy > 0.0);
        }

        #[test]
        fn thomas_round_trips_mass_systems(
            cells in 2usize..60,
            scale in 0.1f64..10.0,
        ) {
            let msh = mesh(cells);
            let sys = assemble_mass(&msh)
                .scaled_add(scale, &assemble_stiffness(&msh))
                .unwrap();
            let v: Vec<f64> = (0..msh.n_interior())
                .map(|i| ((i * i + 1) as f64 * 0.37).sin())
                .collect();
            let rhs = sys.apply(&v).unwrap();
            let x = thomas_solve(&sys, &rhs).unwrap();
            for (a, b) in x.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn prolong_keeps_coarse_nodes(
            coarse_cells in 2usize..20,
            ratio in 1usize..8,
        ) {
            let coarse = mesh(coarse_cells);
            let fine = mesh(coarse_cells * ratio);
            let v = NodalFn::new(
                (0..coarse.n_interior()).map(|i| (i as f64 + 0.5).sin()).collect(),
            );
            let lifted = prolong(&coarse, &v, &fine).unwrap();
            for i in 0..coarse.n_interior() {
                let j = (i + 1) * ratio - 1;
                prop_assert_eq!(lifted.values()[j], v.values()[i]);
            }
            let d = l2_diff_nested(&coarse, &v, &fine, &lifted).unwrap();
            prop_assert!(d <= 1e-13);
        }
    }
}
