//! Online accumulation of the time-stepping history sum
//! S^n = sum_{k=0}^{n-1} beta_{n-k} V^k for vector-valued V^k.
//!
//! Two interchangeable backends: a naive O(n) per-step loop, and a blocked
//! variant that batches far-history contributions with FFTs while keeping the
//! in-block tail naive. Both produce the same sums up to roundoff; the
//! backend is chosen deterministically from the step count alone.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Largest step count still served by the naive backend in `auto`.
pub(crate) const NAIVE_LIMIT: usize = 2048;

/// Block size heuristic balancing the naive tail against FFT batch work.
fn default_block(n_steps: usize) -> usize {
    let raw = (8.0 * n_steps as f64).sqrt();
    let exp = raw.log2().round().max(0.0) as u32;
    (1usize << exp).clamp(128, 2048)
}

/// History accumulator over a fixed weight sequence indexed by lag.
pub(crate) enum HistoryAccum {
    Naive(NaiveHistory),
    Blocked(BlockedHistory),
}

impl HistoryAccum {
    /// Naive backend.
    pub fn naive(betas: Vec<f64>, width: usize) -> Self {
        HistoryAccum::Naive(NaiveHistory {
            betas,
            width,
            data: Vec::new(),
        })
    }

    /// Blocked backend with an explicit power-of-two block size.
    pub fn blocked(betas: Vec<f64>, width: usize, block: usize) -> Self {
        HistoryAccum::Blocked(BlockedHistory::new(betas, width, block))
    }

    /// Backend choice by problem size; deterministic for reproducibility.
    pub fn auto(betas: Vec<f64>, width: usize, n_steps: usize) -> Self {
        if n_steps <= NAIVE_LIMIT {
            Self::naive(betas, width)
        } else {
            let block = default_block(n_steps);
            Self::blocked(betas, width, block)
        }
    }

    /// Appends V^k where k is the number of entries pushed so far.
    pub fn push(&mut self, v: &[f64]) {
        match self {
            HistoryAccum::Naive(h) => h.push(v),
            HistoryAccum::Blocked(h) => h.push(v),
        }
    }

    /// Writes S^n into `out`; `n` must equal the number of pushed entries.
    pub fn write_history(&mut self, n: usize, out: &mut [f64]) {
        match self {
            HistoryAccum::Naive(h) => h.write_history(n, out),
            HistoryAccum::Blocked(h) => h.write_history(n, out),
        }
    }
}

/// Direct summation over the full stored history.
pub(crate) struct NaiveHistory {
    betas: Vec<f64>,
    width: usize,
    data: Vec<f64>,
}

impl NaiveHistory {
    fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.width);
        self.data.extend_from_slice(v);
    }

    fn write_history(&mut self, n: usize, out: &mut [f64]) {
        debug_assert_eq!(n * self.width, self.data.len());
        debug_assert_eq!(out.len(), self.width);
        out.fill(0.0);
        for k in 0..n {
            let w = self.betas[n - k];
            let row = &self.data[k * self.width..(k + 1) * self.width];
            for (o, x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
    }
}

/// Blocked accumulation: completed blocks of B entries contribute through
/// frequency space, the current partial block directly.
///
/// For a step n in step-block c (steps cB+1..=cB+B) and a completed V-block
/// b < c, the contribution is a linear convolution of the weight segment
/// beta[(c-b)B - B + 1 ..= (c-b)B + B] with the block's B entries. Reading
/// only outputs B-1+m for m = 1..=B allows a circular length of 2B without
/// aliasing. Component pairs are packed as real/imaginary halves of one
/// complex transform; linearity keeps the two streams separable.
pub(crate) struct BlockedHistory {
    betas: Vec<f64>,
    width: usize,
    block: usize,
    fft_len: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    data: Vec<f64>,
    pushed: usize,
    /// Spectra of completed V-blocks: n_pairs * fft_len entries per block.
    block_spectra: Vec<Vec<Complex64>>,
    /// Weight-segment spectra keyed by block distance (index 0 unused).
    weight_spectra: Vec<Option<Vec<Complex64>>>,
    /// Far-field values for the current step-block, rows of `width`.
    far: Vec<f64>,
    far_block: Option<usize>,
}

impl BlockedHistory {
    fn new(betas: Vec<f64>, width: usize, block: usize) -> Self {
        assert!(block.is_power_of_two(), "block size must be a power of two");
        assert!(width > 0);
        let fft_len = 2 * block;
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(fft_len);
        let fft_inv = planner.plan_fft_inverse(fft_len);
        let scratch_len = fft_fwd
            .get_inplace_scratch_len()
            .max(fft_inv.get_inplace_scratch_len());
        Self {
            betas,
            width,
            block,
            fft_len,
            fft_fwd,
            fft_inv,
            scratch: vec![Complex64::default(); scratch_len],
            data: Vec::new(),
            pushed: 0,
            block_spectra: Vec::new(),
            weight_spectra: Vec::new(),
            far: vec![0.0; block * width],
            far_block: None,
        }
    }

    fn n_pairs(&self) -> usize {
        self.width.div_ceil(2)
    }

    fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.width);
        self.data.extend_from_slice(v);
        self.pushed += 1;
        if self.pushed % self.block == 0 {
            self.spectrum_of_block(self.pushed / self.block - 1);
        }
    }

    /// Forward-transforms completed block `b`, packing component pairs.
    fn spectrum_of_block(&mut self, b: usize) {
        debug_assert_eq!(self.block_spectra.len(), b);
        let n_pairs = self.n_pairs();
        let mut spec = vec![Complex64::default(); n_pairs * self.fft_len];
        let base = b * self.block;
        for p in 0..n_pairs {
            let buf = &mut spec[p * self.fft_len..(p + 1) * self.fft_len];
            for t in 0..self.block {
                let row = &self.data[(base + t) * self.width..(base + t + 1) * self.width];
                let re = row[2 * p];
                let im = if 2 * p + 1 < self.width {
                    row[2 * p + 1]
                } else {
                    0.0
                };
                buf[t] = Complex64::new(re, im);
            }
            self.fft_fwd.process_with_scratch(buf, &mut self.scratch);
        }
        self.block_spectra.push(spec);
    }

    /// Spectrum of the weight segment at block distance `dist` >= 1.
    fn weight_spectrum(&mut self, dist: usize) -> &[Complex64] {
        if self.weight_spectra.len() <= dist {
            self.weight_spectra.resize(dist + 1, None);
        }
        if self.weight_spectra[dist].is_none() {
            let mut buf = vec![Complex64::default(); self.fft_len];
            let start = dist * self.block - self.block + 1;
            for (s, slot) in buf.iter_mut().enumerate() {
                let idx = start + s;
                if idx < self.betas.len() {
                    *slot = Complex64::new(self.betas[idx], 0.0);
                }
            }
            self.fft_fwd
                .process_with_scratch(&mut buf, &mut self.scratch);
            self.weight_spectra[dist] = Some(buf);
        }
        self.weight_spectra[dist].as_deref().unwrap()
    }

    /// Computes far-field rows for step-block `c` from all completed blocks.
    fn compute_far(&mut self, c: usize) {
        let n_pairs = self.n_pairs();
        let fft_len = self.fft_len;
        // Materialize weight spectra first so the accumulation below can
        // borrow block and weight spectra simultaneously.
        for b in 0..c {
            self.weight_spectrum(c - b);
        }
        let mut acc = vec![Complex64::default(); fft_len];
        self.far.fill(0.0);
        for p in 0..n_pairs {
            acc.fill(Complex64::default());
            for b in 0..c {
                let wspec = self.weight_spectra[c - b].as_deref().unwrap();
                let vspec = &self.block_spectra[b][p * fft_len..(p + 1) * fft_len];
                for ((a, w), v) in acc.iter_mut().zip(wspec).zip(vspec) {
                    *a += w * v;
                }
            }
            self.fft_inv
                .process_with_scratch(&mut acc, &mut self.scratch);
            let scale = 1.0 / fft_len as f64;
            for m in 1..=self.block {
                let val = acc[self.block - 1 + m] * scale;
                let row = &mut self.far[(m - 1) * self.width..m * self.width];
                row[2 * p] = val.re;
                if 2 * p + 1 < self.width {
                    row[2 * p + 1] = val.im;
                }
            }
        }
        self.far_block = Some(c);
    }

    fn write_history(&mut self, n: usize, out: &mut [f64]) {
        debug_assert_eq!(n, self.pushed);
        debug_assert_eq!(out.len(), self.width);
        if n == 0 {
            out.fill(0.0);
            return;
        }
        let c = (n - 1) / self.block;
        if c == 0 {
            out.fill(0.0);
        } else {
            if self.far_block != Some(c) {
                self.compute_far(c);
            }
            let m = n - c * self.block;
            out.copy_from_slice(&self.far[(m - 1) * self.width..m * self.width]);
        }
        // Naive tail over the current, still incomplete block.
        for k in (c * self.block)..n {
            let w = self.betas[n - k];
            let row = &self.data[k * self.width..(k + 1) * self.width];
            for (o, x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracweights::{cq_weights, l1_weights};
    use proptest::prelude::*;

    /// Deterministic filler so comparisons are reproducible.
    fn wave(k: usize, j: usize) -> f64 {
        ((k as f64 * 0.73 + j as f64 * 1.31).sin() + 0.2 * (k as f64 * 0.11).cos()) * 0.8
    }

    fn run_both(betas: &[f64], width: usize, n_steps: usize, block: usize) {
        let mut naive = HistoryAccum::naive(betas.to_vec(), width);
        let mut fast = HistoryAccum::blocked(betas.to_vec(), width, block);
        let mut nv = vec![0.0; width];
        let mut fv = vec![0.0; width];
        let mut scale: f64 = 1e-30;
        for n in 1..=n_steps {
            naive.write_history(n - 1, &mut nv);
            fast.write_history(n - 1, &mut fv);
            for (a, b) in nv.iter().zip(&fv) {
                scale = scale.max(a.abs());
                assert!(
                    (a - b).abs() <= 1e-12 * scale.max(1.0),
                    "step {n}: naive {a:.17e} vs blocked {b:.17e}"
                );
            }
            let v: Vec<f64> = (0..width).map(|j| wave(n - 1, j)).collect();
            naive.push(&v);
            fast.push(&v);
        }
        // Final read at n == n_steps.
        naive.write_history(n_steps, &mut nv);
        fast.write_history(n_steps, &mut fv);
        for (a, b) in nv.iter().zip(&fv) {
            assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn blocked_matches_naive_for_scheme_weights() {
        for betas in [
            l1_weights(0.4, 300).unwrap().betas().to_vec(),
            cq_weights(0.85, 300).unwrap().betas().to_vec(),
        ] {
            run_both(&betas, 3, 300, 16);
            run_both(&betas, 4, 300, 32);
        }
    }

    #[test]
    fn blocked_handles_short_runs_and_odd_widths() {
        let betas = l1_weights(0.6, 700).unwrap().betas().to_vec();
        run_both(&betas, 1, 10, 16); // never leaves the first block
        run_both(&betas, 5, 130, 128); // exactly one completed block + tail
        run_both(&betas, 7, 700, 64);
    }

    #[test]
    fn backward_euler_weights_reduce_to_previous_entry() {
        // With weights {1, -1, 0, ...} the sum is exactly -V^(n-1).
        let mut betas = vec![0.0; 65];
        betas[0] = 1.0;
        betas[1] = -1.0;
        let mut acc = HistoryAccum::naive(betas, 2);
        let mut out = vec![0.0; 2];
        for n in 1..=64 {
            let v = vec![wave(n, 0), wave(n, 1)];
            acc.push(&v);
            acc.write_history(n, &mut out);
            assert_eq!(out[0], -v[0]);
            assert_eq!(out[1], -v[1]);
        }
    }

    #[test]
    fn auto_picks_naive_for_small_runs() {
        let betas = vec![1.0, -1.0, 0.0];
        assert!(matches!(
            HistoryAccum::auto(betas.clone(), 1, 2),
            HistoryAccum::Naive(_)
        ));
        let long = l1_weights(0.5, 4000).unwrap().betas().to_vec();
        assert!(matches!(
            HistoryAccum::auto(long, 1, 4000),
            HistoryAccum::Blocked(_)
        ));
    }

    #[test]
    fn default_block_is_clamped_power_of_two() {
        for &n in &[2049usize, 10_000, 16_000, 64_000, 1_000_000] {
            let b = default_block(n);
            assert!(b.is_power_of_two());
            assert!((128..=2048).contains(&b));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn blocked_equals_naive_on_random_shapes(
            n_steps in 1usize..220,
            width in 1usize..6,
            block_pow in 2u32..6,
            alpha_milli in 50u32..1000,
        ) {
            let alpha = alpha_milli as f64 / 1000.0;
            let betas = l1_weights(alpha, n_steps).unwrap().betas().to_vec();
            run_both(&betas, width, n_steps, 1 << block_pow);
        }
    }
}
