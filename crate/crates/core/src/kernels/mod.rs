//! Biot–Savart kernel on the torus, its mollified version, and related bounds.
//!
//! Sign convention: K̂(k) = i (k2, -k1) / |k|^2, so that u = K * ξ satisfies
//! curl u = ξ and div u = 0. In real form
//! K(x) = (2π)^{-2} Σ_{k≠0} (-k2, k1) sin(k·x) / |k|^2, which behaves like
//! (-x2, x1) / (2π |x|^2) near the origin.

pub mod mollifier;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{index_of, Fft2};
use crate::metrics::SignedAtomicMeasure;
use crate::torus::{min_image, TorusDisplacement, TorusGrid, TorusPoint, PERIOD};

pub use mollifier::{BumpProfile, Mollifier};

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Smallest displacement at which the unmollified kernel may be evaluated.
pub const SINGULAR_RADIUS: f64 = 1e-12;

/// Smallest admissible interpolation table size.
pub const MIN_TABLE_N: usize = 256;

/// Per-point sine and cosine tables for e^{i m x}, m = 0..=kmax.
pub(crate) fn power_table(x: f64, kmax: usize, out: &mut Vec<Complex64>) {
    out.clear();
    let step = Complex64::new(x.cos(), x.sin());
    let mut z = Complex64::new(1.0, 0.0);
    for m in 0..=kmax {
        if m > 0 && m % 16 == 0 {
            // refresh periodically to keep accumulated rounding at the 1e-15 level
            let a = m as f64 * x;
            z = Complex64::new(a.cos(), a.sin());
        }
        out.push(z);
        z *= step;
    }
}

#[inline]
pub(crate) fn signed_power(table: &[Complex64], k: i64) -> Complex64 {
    if k >= 0 {
        table[k as usize]
    } else {
        table[(-k) as usize].conj()
    }
}

/// Truncated Fourier representation of the periodic Biot–Savart kernel.
#[derive(Debug, Clone, Copy)]
pub struct SpectralKernel {
    kmax: usize,
}

impl SpectralKernel {
    pub fn new(kmax: usize) -> Result<Self> {
        if kmax == 0 {
            return Err(invalid("kernel kmax must be at least 1"));
        }
        Ok(SpectralKernel { kmax })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// K̂(k) = i k⊥ w as the integer direction k⊥ = (k2, -k1) and weight w = 1 / |k|^2;
    /// w = 0 at k = 0.
    #[inline]
    pub fn factor(k1: i64, k2: i64) -> ([i64; 2], f64) {
        if k1 == 0 && k2 == 0 {
            return ([0, 0], 0.0);
        }
        ([k2, -k1], 1.0 / (k1 * k1 + k2 * k2) as f64)
    }

    /// K̂(k); zero at k = 0.
    #[inline]
    pub fn coefficient(k1: i64, k2: i64) -> [Complex64; 2] {
        let (dir, w) = Self::factor(k1, k2);
        [
            Complex64::new(0.0, dir[0] as f64 * w),
            Complex64::new(0.0, dir[1] as f64 * w),
        ]
    }

    /// Direct evaluation of the truncated series. Errors near the singularity.
    pub fn eval(&self, x: TorusDisplacement) -> Result<[f64; 2]> {
        if x.norm() < SINGULAR_RADIUS {
            return Err(Error::Singular(x.norm()));
        }
        Ok(series_sum(x, self.kmax, |_| 1.0))
    }
}

/// Σ_{0<|k|∞<=kmax} (-k2, k1) sin(k·x) m(k) / |k|^2 / (2π)^2.
fn series_sum(x: TorusDisplacement, kmax: usize, mult: impl Fn((i64, i64)) -> f64) -> [f64; 2] {
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    power_table(x.d1, kmax, &mut e1);
    power_table(x.d2, kmax, &mut e2);
    let km = kmax as i64;
    let mut acc = [0.0, 0.0];
    // pair k with -k: both contribute the same real term
    for k1 in 0..=km {
        let k2_start = if k1 == 0 { 1 } else { -km };
        for k2 in k2_start..=km {
            let z = signed_power(&e1, k1) * signed_power(&e2, k2);
            let w = 2.0 * z.im * mult((k1, k2)) / (k1 * k1 + k2 * k2) as f64;
            acc[0] -= k2 as f64 * w;
            acc[1] += k1 as f64 * w;
        }
    }
    [acc[0] / FOUR_PI_SQ, acc[1] / FOUR_PI_SQ]
}

/// Spectral divergence Σ k·K̂(k) m(k) e^{ik·x}; vanishes mode by mode.
pub fn spectral_divergence(kernel: &MollifiedKernel, x: TorusDisplacement) -> f64 {
    let km = kernel.kmax() as i64;
    let mut acc = 0.0;
    for k1 in -km..=km {
        for k2 in -km..=km {
            let c = SpectralKernel::coefficient(k1, k2);
            let m = kernel.multiplier(k1, k2);
            let phase = k1 as f64 * x.d1 + k2 as f64 * x.d2;
            let e = Complex64::new(phase.cos(), phase.sin());
            let div = (c[0] * k1 as f64 + c[1] * k2 as f64) * m * e;
            acc += div.re;
        }
    }
    acc
}

/// Gridded samples of a vector kernel, used for interpolation.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: usize,
    inv_h: f64,
    values: Vec<[f64; 2]>,
}

impl KernelTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major samples at nodes (i h, j h).
    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// Bilinear interpolation, evaluated on the half plane {d1 > 0} ∪ {d1 = 0, d2 >= 0}
    /// and extended by oddness. The result is exactly odd in `d` and exactly zero at 0.
    #[inline]
    pub fn eval(&self, d1: f64, d2: f64) -> [f64; 2] {
        let (sign, a1, a2) = if d1 > 0.0 || (d1 == 0.0 && d2 >= 0.0) {
            (1.0, d1, d2)
        } else {
            (-1.0, -d1, -d2)
        };
        let n = self.n;
        let u = a1 * self.inv_h;
        let v = a2 * self.inv_h;
        let uf = u.floor();
        let vf = v.floor();
        let fx = u - uf;
        let fy = v - vf;
        let i0 = uf as usize;
        let mut j0 = vf as i64;
        if j0 < 0 {
            j0 += n as i64;
        }
        let j0 = j0 as usize;
        let i1 = if i0 + 1 >= n { i0 + 1 - n } else { i0 + 1 };
        let j1 = if j0 + 1 >= n { 0 } else { j0 + 1 };
        let v00 = self.values[i0 * n + j0];
        let v01 = self.values[i0 * n + j1];
        let v10 = self.values[i1 * n + j0];
        let v11 = self.values[i1 * n + j1];
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w10 = fx * (1.0 - fy);
        let w11 = fx * fy;
        [
            sign * (w00 * v00[0] + w01 * v01[0] + w10 * v10[0] + w11 * v11[0]),
            sign * (w00 * v00[1] + w01 * v01[1] + w10 * v10[1] + w11 * v11[1]),
        ]
    }
}

/// K^ε = K * ρ^ε together with its interpolation table and derivative bound.
#[derive(Debug, Clone)]
pub struct MollifiedKernel {
    spectral: SpectralKernel,
    mollifier: Mollifier,
    multipliers: Vec<f64>,
    table: KernelTable,
    dk_sup: f64,
}

/// Default table size: at least `MIN_TABLE_N`, at least 64/ε (bilinear error O((h/ε)^2) stays near 1e-3 of sup K^ε), and above the mode cutoff.
pub fn default_table_n(eps: f64, kmax: usize) -> usize {
    let by_eps = (64.0 / eps).ceil() as usize;
    MIN_TABLE_N
        .max(by_eps)
        .max(2 * kmax + 2)
        .next_power_of_two()
}

impl MollifiedKernel {
    /// Build the mollified kernel; `table_n = None` picks `default_table_n`.
    pub fn new(eps: f64, kmax: usize, table_n: Option<usize>) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        if eps >= PI {
            return Err(invalid(format!("eps = {eps} leaves no room in the domain")));
        }
        let spectral = SpectralKernel::new(kmax)?;
        let n = table_n.unwrap_or_else(|| default_table_n(eps, kmax));
        let required = MIN_TABLE_N.max((8.0 / eps).ceil() as usize);
        if n < required {
            return Err(Error::GridTooCoarse { n, required, eps });
        }
        if n < 2 * kmax + 2 {
            return Err(invalid(format!(
                "table size {n} cannot represent modes up to kmax = {kmax}"
            )));
        }
        let mollifier = Mollifier::new(eps);
        let multipliers = mollifier.lattice_multipliers(kmax);
        let mut kernel = MollifiedKernel {
            spectral,
            mollifier,
            multipliers,
            table: KernelTable {
                n,
                inv_h: n as f64 / PERIOD,
                values: Vec::new(),
            },
            dk_sup: 0.0,
        };
        kernel.build_tables(n);
        Ok(kernel)
    }

    fn build_tables(&mut self, n: usize) {
        let fft = Fft2::new(n);
        let km = self.kmax() as i64;
        let zero = Complex64::new(0.0, 0.0);
        // components K1, K2 and the four derivatives ∂_j K_i
        let mut fields = vec![vec![zero; n * n]; 6];
        for k1 in -km..=km {
            for k2 in -km..=km {
                let c = SpectralKernel::coefficient(k1, k2);
                let m = self.multiplier(k1, k2) / FOUR_PI_SQ;
                let idx = index_of(k1, n) * n + index_of(k2, n);
                let ik = [Complex64::new(0.0, k1 as f64), Complex64::new(0.0, k2 as f64)];
                fields[0][idx] = c[0] * m;
                fields[1][idx] = c[1] * m;
                fields[2][idx] = c[0] * m * ik[0];
                fields[3][idx] = c[0] * m * ik[1];
                fields[4][idx] = c[1] * m * ik[0];
                fields[5][idx] = c[1] * m * ik[1];
            }
        }
        for f in fields.iter_mut() {
            fft.inverse(f);
        }
        let mut values = vec![[0.0; 2]; n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let neg = ((n - i) % n) * n + (n - j) % n;
                values[idx] = [
                    0.5 * (fields[0][idx].re - fields[0][neg].re),
                    0.5 * (fields[1][idx].re - fields[1][neg].re),
                ];
            }
        }
        let mut sup: f64 = 0.0;
        for idx in 0..n * n {
            let fro = (fields[2][idx].re.powi(2)
                + fields[3][idx].re.powi(2)
                + fields[4][idx].re.powi(2)
                + fields[5][idx].re.powi(2))
            .sqrt();
            sup = sup.max(fro);
        }
        self.table.values = values;
        self.dk_sup = sup;
    }

    pub fn eps(&self) -> f64 {
        self.mollifier.eps()
    }

    pub fn kmax(&self) -> usize {
        self.spectral.kmax()
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    /// ρ̂(ε|k|) for |k|∞ <= kmax.
    #[inline]
    pub fn multiplier(&self, k1: i64, k2: i64) -> f64 {
        let km = self.kmax() as i64;
        let side = (2 * km + 1) as usize;
        self.multipliers[((k1 + km) as usize) * side + (k2 + km) as usize]
    }

    /// Fast evaluation from the interpolation table.
    #[inline]
    pub fn eval(&self, d1: f64, d2: f64) -> [f64; 2] {
        self.table.eval(d1, d2)
    }

    /// Direct evaluation of the truncated Fourier series of K^ε.
    pub fn eval_series(&self, x: TorusDisplacement) -> [f64; 2] {
        series_sum(x, self.kmax(), |(k1, k2)| self.multiplier(k1, k2))
    }

    /// Grid-sampled sup of the Frobenius norm of DK^ε.
    pub fn dk_sup(&self) -> f64 {
        self.dk_sup
    }

    /// b(x, μ) = Σ_j w_j K^ε(x - y_j).
    pub fn velocity(&self, x: TorusPoint, mu: &SignedAtomicMeasure) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for (p, w) in mu.points().iter().zip(mu.weights()) {
            let d = min_image(x, *p);
            let k = self.eval(d.d1, d.d2);
            acc[0] += w * k[0];
            acc[1] += w * k[1];
        }
        acc
    }
}

/// Direct evaluation of the truncated unmollified kernel.
pub fn eval_k(kernel: &SpectralKernel, x: TorusDisplacement) -> Result<[f64; 2]> {
    kernel.eval(x)
}

/// Direct evaluation of K^ε by its Fourier series.
pub fn eval_k_eps(kernel: &MollifiedKernel, x: TorusDisplacement) -> [f64; 2] {
    kernel.eval_series(x)
}

/// Sup norm of DK^ε sampled on the table grid.
pub fn dk_eps_sup(kernel: &MollifiedKernel) -> f64 {
    kernel.dk_sup()
}

/// Lipschitz constant of x -> b(x, μ) for ‖μ‖_TV <= tv.
pub fn lipschitz_bound_b(kernel: &MollifiedKernel, tv: f64) -> f64 {
    kernel.dk_sup() * tv
}

/// ‖K^ε - K‖_{L1} on an n x n quadrature grid.
///
/// The singular part is split off at the core scale η = ε/2. Near the origin
/// K = (planar kernel) + H with H smooth, and for a radial mollifier the planar part
/// of K^η - K equals planar(x) (M_η(|x|) - 1), M_η the mass of ρ^η inside radius |x|.
/// That part has constant sign and L1 norm η ∫|y| ρ(y) dy, and K^ε - K^η carries the
/// same sign, so the norm splits as ‖K^ε - K^η‖ + η m₁ up to O(ε^4) from H. The smooth
/// difference K^ε - K^η is synthesized spectrally (modes up to min(kmax, n/2 - 1)) and
/// summed over the grid.
pub fn kernel_l1_diff(kernel: &MollifiedKernel, n: usize) -> Result<f64> {
    let eps = kernel.eps();
    let required = (4.0 / eps).ceil() as usize;
    if n < required {
        return Err(Error::GridTooCoarse { n, required, eps });
    }
    let grid = TorusGrid::new(n)?;
    let km = (kernel.kmax() as i64).min(n as i64 / 2 - 1);
    let core = Mollifier::new(0.5 * eps);
    let core_mult = core.lattice_multipliers(km as usize);
    let side = (2 * km + 1) as usize;
    let fft = Fft2::new(n);
    let zero = Complex64::new(0.0, 0.0);
    let mut d1 = vec![zero; n * n];
    let mut d2 = vec![zero; n * n];
    for k1 in -km..=km {
        for k2 in -km..=km {
            let c = SpectralKernel::coefficient(k1, k2);
            let inner = core_mult[((k1 + km) as usize) * side + (k2 + km) as usize];
            let m = (kernel.multiplier(k1, k2) - inner) / FOUR_PI_SQ;
            let idx = index_of(k1, n) * n + index_of(k2, n);
            d1[idx] = c[0] * m;
            d2[idx] = c[1] * m;
        }
    }
    fft.inverse(&mut d1);
    fft.inverse(&mut d2);
    let sum: f64 = d1.iter().zip(&d2).map(|(a, b)| a.re.hypot(b.re)).sum();
    Ok(sum * grid.cell_area() + core.eps() * BumpProfile::get().first_moment())
}

/// γ(r) = r (1 - log r) on (0, 1/e), r + 1/e on [1/e, ∞), γ(0) = 0.
pub fn gamma(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid(format!("gamma requires finite r >= 0, got {r}")));
    }
    let inv_e = (-1.0f64).exp();
    Ok(if r == 0.0 {
        0.0
    } else if r < inv_e {
        r * (1.0 - r.ln())
    } else {
        r + inv_e
    })
}

/// Whether γ(r) <= -log(ε) r + ε, allowing for one rounding unit on each side.
pub fn gamma_bound_holds(r: f64, eps: f64) -> Result<bool> {
    let inv_e = (-1.0f64).exp();
    if !(eps > 0.0 && eps < inv_e) {
        return Err(invalid(format!("bound requires 0 < eps < 1/e, got {eps}")));
    }
    let g = gamma(r)?;
    let rhs = -eps.ln() * r + eps;
    Ok(g <= rhs * (1.0 + 4.0 * f64::EPSILON))
}
