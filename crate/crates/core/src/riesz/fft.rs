//! Circular convolution on periodic grids.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Row-major 2D transform; a 1D grid uses a second axis of length 1.
pub(crate) struct Fft2 {
    n: [usize; 2],
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(n: [usize; 2]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: [planner.plan_fft_forward(n[0]), planner.plan_fft_forward(n[1])],
            inv: [planner.plan_fft_inverse(n[0]), planner.plan_fft_inverse(n[1])],
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [n0, n1] = self.n;
        if n1 > 1 {
            plans[1].process(data);
        }
        if n0 > 1 {
            let mut col = vec![Complex::new(0.0, 0.0); n0];
            for j in 0..n1 {
                for i in 0..n0 {
                    col[i] = data[i * n1 + j];
                }
                plans[0].process(&mut col);
                for i in 0..n0 {
                    data[i * n1 + j] = col[i];
                }
            }
        }
    }

    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    /// Inverse transform of `spectrum · multiplier`, real part, normalized.
    pub(crate) fn apply(&self, spectrum: &[Complex<f64>], multiplier: &[Complex<f64>]) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = spectrum
            .iter()
            .zip(multiplier)
            .map(|(a, b)| a * b)
            .collect();
        self.transform(&mut data, &self.inv);
        let scale = 1.0 / (self.n[0] * self.n[1]) as f64;
        data.iter().map(|c| c.re * scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_identity() {
        let f = Fft2::new([4, 8]);
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = f.forward_real(&v);
        let one = vec![Complex::new(1.0, 0.0); 32];
        let back = f.apply(&s, &one);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
