//! Convolution weights for the two fractional time-stepping schemes and the
//! discrete fractional derivative built from them.
//!
//! Both schemes discretize the order-alpha Caputo derivative on a uniform
//! grid as tau^(-alpha) * sum_j beta_j v^(n-j); they differ only in the
//! weights beta_j. At alpha = 1 both collapse exactly to backward Euler.

use crate::error::{Error, Result};
use crate::fem1d::NodalFn;

/// Which weight family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Piecewise-linear kernel approximation.
    L1,
    /// First-order convolution quadrature generated by backward Euler.
    BeCq,
}

impl Scheme {
    /// Short lowercase label used by CLI flags and file names.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::L1 => "l1",
            Scheme::BeCq => "cq",
        }
    }
}

/// Weight sequence beta_0..beta_N for one scheme, order, and step count.
#[derive(Debug, Clone)]
pub struct FracWeights {
    scheme: Scheme,
    alpha: f64,
    betas: Vec<f64>,
}

impl FracWeights {
    /// Builds the weights for `scheme` with order `alpha` in (0, 1] covering
    /// steps 0..=n_steps.
    pub fn new(scheme: Scheme, alpha: f64, n_steps: usize) -> Result<Self> {
        match scheme {
            Scheme::L1 => l1_weights(alpha, n_steps),
            Scheme::BeCq => cq_weights(alpha, n_steps),
        }
    }

    /// Scheme the weights belong to.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Fractional order.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest usable lag, equal to the step count the weights were built for.
    pub fn n_steps(&self) -> usize {
        self.betas.len() - 1
    }

    /// Weight at lag `j`.
    pub fn beta(&self, j: usize) -> f64 {
        self.betas[j]
    }

    /// Full weight slice indexed by lag.
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Weights of the piecewise-linear scheme: beta_0 = 1 and
/// beta_j = (j+1)^(1-a) - 2 j^(1-a) + (j-1)^(1-a) for j >= 1.
///
/// Built from first differences of d_k = k^(1-a) so the partial sums
/// telescope exactly; d_0 is pinned to 0 so alpha = 1 (where 0^0 would
/// evaluate to 1) still collapses to the backward Euler weights.
pub fn l1_weights(alpha: f64, n_steps: usize) -> Result<FracWeights> {
    check_alpha(alpha)?;
    let e = 1.0 - alpha;
    let mut betas = Vec::with_capacity(n_steps + 1);
    betas.push(1.0);
    let mut d_cur = 1.0; // d_1 = 1^(1-a), with d_0 pinned to 0
    let mut diff_prev = 1.0; // D_0 = d_1 - d_0
    for j in 1..=n_steps {
        let d_next = ((j + 1) as f64).powf(e);
        let diff = d_next - d_cur;
        betas.push(diff - diff_prev);
        d_cur = d_next;
        diff_prev = diff;
    }
    Ok(FracWeights {
        scheme: Scheme::L1,
        alpha,
        betas,
    })
}

/// Weights of the backward Euler convolution quadrature: the binomial series
/// of (1 - z)^a, via beta_0 = 1, beta_j = -beta_(j-1) * (a - j + 1) / j.
pub fn cq_weights(alpha: f64, n_steps: usize) -> Result<FracWeights> {
    check_alpha(alpha)?;
    let mut betas = Vec::with_capacity(n_steps + 1);
    betas.push(1.0);
    for j in 1..=n_steps {
        let prev = betas[j - 1];
        betas.push(-prev * (alpha - j as f64 + 1.0) / j as f64);
    }
    Ok(FracWeights {
        scheme: Scheme::BeCq,
        alpha,
        betas,
    })
}

/// Discrete fractional derivative of the trajectory `v` at step `n`:
/// tau^(-alpha) * sum_{j=0..n} beta_j v^(n-j). Entry k of `v` is v^k.
pub fn frac_deriv_forward(
    weights: &FracWeights,
    tau: f64,
    v: &[NodalFn],
    n: usize,
) -> Result<NodalFn> {
    if n >= v.len() {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: v.len(),
        });
    }
    if n > weights.n_steps() {
        return Err(Error::LengthMismatch {
            expected: n,
            got: weights.n_steps(),
        });
    }
    let m = v[0].len();
    let mut acc = vec![0.0; m];
    for j in 0..=n {
        let w = weights.beta(j);
        let entry = &v[n - j];
        if entry.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: entry.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(entry.values()) {
            *a += w * x;
        }
    }
    let scale = tau.powf(-weights.alpha());
    for a in &mut acc {
        *a *= scale;
    }
    Ok(NodalFn::new(acc))
}

/// Adjoint-side fractional derivative at step `m`, summing forward in time:
/// tau^(-alpha) * sum_{i=m..N} beta_(i-m) v^i, with N = v.len() - 1.
pub fn frac_deriv_adjoint(
    weights: &FracWeights,
    tau: f64,
    v: &[NodalFn],
    m: usize,
) -> Result<NodalFn> {
    let n_last = v.len().checked_sub(1).ok_or(Error::LengthMismatch {
        expected: 1,
        got: 0,
    })?;
    if m > n_last {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            got: v.len(),
        });
    }
    if n_last - m > weights.n_steps() {
        return Err(Error::LengthMismatch {
            expected: n_last - m,
            got: weights.n_steps(),
        });
    }
    let width = v[0].len();
    let mut acc = vec![0.0; width];
    for i in m..=n_last {
        let w = weights.beta(i - m);
        let entry = &v[i];
        if entry.len() != width {
            return Err(Error::LengthMismatch {
                expected: width,
                got: entry.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(entry.values()) {
            *a += w * x;
        }
    }
    let scale = tau.powf(-weights.alpha());
    for a in &mut acc {
        *a *= scale;
    }
    Ok(NodalFn::new(acc))
}
