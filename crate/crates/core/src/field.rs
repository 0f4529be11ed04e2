//! Grid-sampled scalar and vector fields on the torus.

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft::{index_of, wavenumber, Fft2};
use crate::metrics::SignedAtomicMeasure;
use crate::torus::{TorusGrid, TorusPoint};

/// Vorticity sampled at the nodes of an n x n grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityField {
    grid: TorusGrid,
    values: Vec<f64>,
    t: f64,
}

impl VorticityField {
    pub fn from_values(n: usize, values: Vec<f64>, t: f64) -> Result<Self> {
        let grid = TorusGrid::new(n)?;
        if values.len() != grid.len() {
            return Err(invalid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field contains non-finite values"));
        }
        Ok(VorticityField { grid, values, t })
    }

    pub fn from_fn(n: usize, f: impl Fn(TorusPoint) -> f64) -> Result<Self> {
        let grid = TorusGrid::new(n)?;
        let values = grid.nodes().map(f).collect();
        Self::from_values(n, values, 0.0)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Σ ξ h^2.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Σ |ξ| h^2.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Σ ξ^2 h^2.
    pub fn enstrophy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()
    }

    /// Subtract the grid mean.
    pub fn remove_mean(&mut self) {
        let m = self.values.iter().sum::<f64>() / self.values.len() as f64;
        self.values.iter_mut().for_each(|v| *v -= m);
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Node atoms with quadrature weights ξ(x_ij) h^2.
    pub fn to_measure(&self) -> SignedAtomicMeasure {
        let w = self.grid.cell_area();
        SignedAtomicMeasure::new(
            self.grid
                .nodes()
                .zip(&self.values)
                .map(|(p, v)| (p, v * w)),
        )
    }

    /// Cubic interpolation at an arbitrary point.
    pub fn interpolate(&self, x: TorusPoint) -> f64 {
        let mut acc = 0.0;
        for_stencil(self.grid, x, |idx, w| acc += w * self.values[idx]);
        acc
    }

    /// Trigonometric interpolation onto an m x m grid (modes above the smaller Nyquist
    /// limit are dropped).
    pub fn resample(&self, m: usize) -> Result<VorticityField> {
        let n = self.n();
        if m == n {
            return Ok(self.clone());
        }
        let fft = Fft2::new(n);
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut buf);
        let kc = (n.min(m) as i64 - 1) / 2;
        let scale = (m * m) as f64 / (n * n) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        for k1 in -kc..=kc {
            for k2 in -kc..=kc {
                out[index_of(k1, m) * m + index_of(k2, m)] = buf[index_of(k1, n) * n + index_of(k2, n)] * scale;
            }
        }
        Fft2::new(m).inverse_normalized(&mut out);
        Self::from_values(m, out.iter().map(|z| z.re).collect(), self.t)
    }
}

/// Velocity sampled on a grid, interpolated with tensor-product cubic Lagrange stencils.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: TorusGrid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

#[inline]
fn cubic_weights(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Visit the 4 x 4 cubic Lagrange stencil around x as (flat index, weight).
fn for_stencil(grid: TorusGrid, x: TorusPoint, mut f: impl FnMut(usize, f64)) {
    let n = grid.n() as i64;
    let h = grid.spacing();
    let (u, v) = (x.x1() / h, x.x2() / h);
    let (i0, j0) = (u.floor(), v.floor());
    let wx = cubic_weights(u - i0);
    let wy = cubic_weights(v - j0);
    let (i0, j0) = (i0 as i64, j0 as i64);
    for (a, wa) in wx.iter().enumerate() {
        let i = (i0 + a as i64 - 1).rem_euclid(n);
        for (b, wb) in wy.iter().enumerate() {
            let j = (j0 + b as i64 - 1).rem_euclid(n);
            f((i * n + j) as usize, wa * wb);
        }
    }
}

impl VelocityField {
    pub fn new(grid: TorusGrid, u1: Vec<f64>, u2: Vec<f64>) -> Self {
        VelocityField { grid, u1, u2 }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.u1
            .iter()
            .zip(&self.u2)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Cubic interpolation at an arbitrary point.
    pub fn interpolate(&self, x: TorusPoint) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for_stencil(self.grid, x, |idx, w| {
            acc[0] += w * self.u1[idx];
            acc[1] += w * self.u2[idx];
        });
        acc
    }
}

/// u = K * ξ on the grid of the field, computed spectrally.
pub fn velocity_from_vorticity(field: &VorticityField) -> VelocityField {
    let n = field.n();
    let fft = Fft2::new(n);
    let mut buf: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    velocity_from_coefficients(&fft, &buf)
}

/// Velocity from unnormalized DFT coefficients of the vorticity.
pub(crate) fn velocity_from_coefficients(fft: &Fft2, coeffs: &[Complex64]) -> VelocityField {
    let n = fft.n();
    // û1 + i û2 transforms to u1 + i u2 since both fields are real
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for m1 in 0..n {
        for m2 in 0..n {
            let (k1, k2) = (wavenumber(m1, n), wavenumber(m2, n));
            if (k1 == 0 && k2 == 0) || 2 * k1.unsigned_abs() as usize == n || 2 * k2.unsigned_abs() as usize == n {
                continue;
            }
            let c = crate::kernels::SpectralKernel::coefficient(k1, k2);
            let idx = m1 * n + m2;
            u[idx] = (c[0] + Complex64::i() * c[1]) * coeffs[idx];
        }
    }
    fft.inverse_normalized(&mut u);
    VelocityField::new(
        TorusGrid::new(n).expect("n > 0"),
        u.iter().map(|z| z.re).collect(),
        u.iter().map(|z| z.im).collect(),
    )
}
