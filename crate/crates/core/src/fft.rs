//! Square two-dimensional FFT on row-major n x n buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward (e^{-i}) and inverse (e^{+i}) 2D transforms.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    /// Inverse transform scaled by 1/n^2, so that `inverse_normalized(forward(x)) == x`.
    pub fn inverse_normalized(&self, data: &mut [Complex64]) {
        self.inverse(data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n * self.n, "buffer is not n x n");
        plan.process(data);
        transpose(data, self.n);
        plan.process(data);
        transpose(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed wavenumber of DFT index `m` on an n-point grid; the Nyquist index maps to +n/2.
#[inline]
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// DFT index of a signed wavenumber.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
