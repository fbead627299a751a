//! Line-by-line FFTs over the 4D lattice.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct FftPlans {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPlans {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    /// Unnormalized transform of every line along `axis`.
    pub(crate) fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let stride = self.stride(axis);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if stride == 1 {
            for line in data.chunks_exact_mut(n) {
                plan.process_with_scratch(line, &mut scratch);
            }
            return;
        }
        let mut line = vec![Complex64::default(); n];
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[start + j * stride] = *v;
                }
            }
        }
    }

    /// Apply a real multiplier `m(j)` times `i` along one axis (for first derivatives).
    pub(crate) fn differentiate(&self, values: &[f64], axis: usize, symbol: &[f64]) -> Vec<f64> {
        let n = self.n;
        let stride = self.stride(axis);
        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; values.len()];
        let mut line = vec![Complex64::default(); n];
        let mut scratch =
            vec![Complex64::default(); self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())];
        let block = stride * n;
        for base in (0..values.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = Complex64::new(values[start + j * stride], 0.0);
                }
                self.forward.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter_mut().enumerate() {
                    *v = Complex64::new(-v.im, v.re) * (symbol[j] * scale);
                }
                self.inverse.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    out[start + j * stride] = v.re;
                }
            }
        }
        out
    }

    pub(crate) fn forward_4d(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for axis in 0..4 {
            self.transform_axis(&mut data, axis, false);
        }
        data
    }

    /// Inverse transform including the `1/n^4` normalization; returns the real part.
    pub(crate) fn inverse_4d(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        for axis in 0..4 {
            self.transform_axis(&mut data, axis, true);
        }
        let scale = 1.0 / (data.len() as f64);
        data.into_iter().map(|c| c.re * scale).collect()
    }
}
