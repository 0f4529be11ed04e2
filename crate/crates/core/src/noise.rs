//! Transport noise fields σ_k and the shared Brownian path that drives them.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::kernels::{power_table, signed_power};
use crate::torus::TorusPoint;

/// One trigonometric mode σ_k(x) = (cos(k·x) + sin(k·x)) a_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMode {
    pub k: [i64; 2],
    pub amplitude: [f64; 2],
}

impl NoiseMode {
    /// The divergence-free mode a_k = k⊥ / |k|^β with k⊥ = (-k2, k1).
    pub fn perpendicular(k1: i64, k2: i64, beta: f64) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            return Err(invalid("noise mode k = 0 is not allowed"));
        }
        let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
        let s = norm.powf(-beta);
        Ok(NoiseMode {
            k: [k1, k2],
            amplitude: [-(k2 as f64) * s, k1 as f64 * s],
        })
    }

    #[inline]
    fn phase(&self, x: TorusPoint) -> f64 {
        self.k[0] as f64 * x.x1() + self.k[1] as f64 * x.x2()
    }

    pub fn eval(&self, x: TorusPoint) -> [f64; 2] {
        let (s, c) = self.phase(x).sin_cos();
        [(c + s) * self.amplitude[0], (c + s) * self.amplitude[1]]
    }

    /// Jacobian ∂_j σ^i = (cos - sin) a^i k_j.
    pub fn jacobian(&self, x: TorusPoint) -> [[f64; 2]; 2] {
        let (s, c) = self.phase(x).sin_cos();
        let f = c - s;
        let a = self.amplitude;
        let k = [self.k[0] as f64, self.k[1] as f64];
        [[f * a[0] * k[0], f * a[0] * k[1]], [f * a[1] * k[0], f * a[1] * k[1]]]
    }

    /// div σ_k = (cos - sin) (k · a_k).
    pub fn divergence(&self, x: TorusPoint) -> f64 {
        let j = self.jacobian(x);
        j[0][0] + j[1][1]
    }

    /// sup_x |σ_k(x)| = √2 |a_k|.
    pub fn sup_norm(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.amplitude[0].hypot(self.amplitude[1])
    }
}

/// A finite family of noise modes in a fixed, deterministic order.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    modes: Vec<NoiseMode>,
    lattice_kmax: usize,
}

impl NoiseModel {
    /// All modes 0 < |k|∞ <= kmax with a_k = k⊥ / |k|^β, ordered by (k1, k2).
    pub fn perpendicular(kmax: usize, beta: f64) -> Result<Self> {
        if beta <= 4.0 || !beta.is_finite() {
            return Err(invalid(format!("noise decay beta must exceed 4, got {beta}")));
        }
        let km = kmax as i64;
        let mut modes = Vec::new();
        for k1 in -km..=km {
            for k2 in -km..=km {
                if k1 != 0 || k2 != 0 {
                    modes.push(NoiseMode::perpendicular(k1, k2, beta)?);
                }
            }
        }
        Self::from_modes(modes)
    }

    /// Arbitrary trigonometric modes. The list order fixes the Brownian stream index.
    pub fn from_modes(modes: Vec<NoiseMode>) -> Result<Self> {
        let lattice_kmax = modes
            .iter()
            .map(|m| m.k[0].unsigned_abs().max(m.k[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0);
        if modes.iter().any(|m| m.k == [0, 0]) {
            return Err(invalid("noise mode k = 0 is not allowed"));
        }
        Ok(NoiseModel {
            modes,
            lattice_kmax,
        })
    }

    /// The model with no modes (deterministic dynamics).
    pub fn none() -> Self {
        NoiseModel {
            modes: Vec::new(),
            lattice_kmax: 0,
        }
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lattice_kmax(&self) -> usize {
        self.lattice_kmax
    }

    /// Q(x, y) = Σ_k σ_k(x) ⊗ σ_k(y).
    pub fn covariance(&self, x: TorusPoint, y: TorusPoint) -> [[f64; 2]; 2] {
        let mut q = [[0.0; 2]; 2];
        for m in &self.modes {
            let sx = m.eval(x);
            let sy = m.eval(y);
            for i in 0..2 {
                for j in 0..2 {
                    q[i][j] += sx[i] * sy[j];
                }
            }
        }
        q
    }

    /// Itô-to-Stratonovich correction (1/2) Σ_k (Dσ_k) σ_k.
    pub fn strat_correction(&self, x: TorusPoint) -> [f64; 2] {
        let mut c = [0.0; 2];
        for m in &self.modes {
            let j = m.jacobian(x);
            let s = m.eval(x);
            c[0] += 0.5 * (j[0][0] * s[0] + j[0][1] * s[1]);
            c[1] += 0.5 * (j[1][0] * s[0] + j[1][1] * s[1]);
        }
        c
    }

    /// Whether every mode satisfies k · a_k = 0, which makes σ_k divergence free
    /// and the Stratonovich correction vanish identically.
    pub fn is_transverse(&self) -> bool {
        self.modes.iter().all(|m| {
            let dot = m.k[0] as f64 * m.amplitude[0] + m.k[1] as f64 * m.amplitude[1];
            dot.abs() <= 1e-15 * (m.amplitude[0].abs() + m.amplitude[1].abs())
        })
    }

    /// Diagonal constant a of Q(0) = a I when the model is isotropic.
    pub fn isotropic_variance(&self) -> Result<f64> {
        let q = self.covariance(TorusPoint::ORIGIN, TorusPoint::ORIGIN);
        let a = 0.5 * (q[0][0] + q[1][1]);
        let tol = 1e-12 * a.abs().max(1e-300);
        if (q[0][0] - q[1][1]).abs() > tol || q[0][1].abs() > tol || q[1][0].abs() > tol {
            return Err(invalid(format!("noise covariance Q(0) = {q:?} is not isotropic")));
        }
        Ok(a)
    }

    /// Σ_k sup|σ_k|, the largest possible noise speed per unit increment.
    pub fn sup_sum(&self) -> f64 {
        self.modes.iter().map(NoiseMode::sup_norm).sum()
    }

    /// Per-step weights w_k = a_k ΔW_k.
    pub fn weights(&self, dw: &[f64], out: &mut Vec<[f64; 2]>) {
        out.clear();
        out.extend(
            self.modes
                .iter()
                .zip(dw)
                .map(|(m, w)| [m.amplitude[0] * w, m.amplitude[1] * w]),
        );
    }

    /// Σ_k σ_k(x) ΔW_k given precomputed weights.
    pub fn displacement(&self, x: TorusPoint, weights: &[[f64; 2]], scratch: &mut NoiseScratch) -> [f64; 2] {
        let km = self.lattice_kmax;
        power_table(x.x1(), km, &mut scratch.e1);
        power_table(x.x2(), km, &mut scratch.e2);
        let mut acc = [0.0; 2];
        for (m, w) in self.modes.iter().zip(weights) {
            let z = signed_power(&scratch.e1, m.k[0]) * signed_power(&scratch.e2, m.k[1]);
            let f = z.re + z.im;
            acc[0] += f * w[0];
            acc[1] += f * w[1];
        }
        acc
    }

    /// Spectral coefficients (DFT-normalized, length n^2) of the field Σ_k ΔW_k σ_k.
    pub fn field_coefficients(&self, dw: &[f64], n: usize) -> [Vec<Complex64>; 2] {
        use crate::fft::index_of;
        let zero = Complex64::new(0.0, 0.0);
        let mut out = [vec![zero; n * n], vec![zero; n * n]];
        let scale = (n * n) as f64;
        // cos θ + sin θ = Re[(1 - i) e^{iθ}]
        let half = Complex64::new(0.5, -0.5) * scale;
        for (m, w) in self.modes.iter().zip(dw) {
            let p = index_of(m.k[0], n) * n + index_of(m.k[1], n);
            let q = index_of(-m.k[0], n) * n + index_of(-m.k[1], n);
            for c in 0..2 {
                let v = half * (m.amplitude[c] * w);
                out[c][p] += v;
                out[c][q] += v.conj();
            }
        }
        out
    }
}

/// Reusable buffers for point evaluations of the noise.
#[derive(Debug, Default, Clone)]
pub struct NoiseScratch {
    e1: Vec<Complex64>,
    e2: Vec<Complex64>,
}

/// Counter-based Brownian increments shared by every consumer of a seed.
///
/// Mode m owns ChaCha stream m; the fine increment at fine step j is a Box–Muller
/// normal built from the two 64-bit words at position 2j of that stream, scaled by
/// √dt_fine. A coarse increment over dt = r dt_fine is the sum of its r fine
/// increments, so different step sizes see the same underlying path.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    seed: u64,
    dt_fine: f64,
    n_modes: usize,
}

/// Relative tolerance when checking that a step is an integer multiple of dt_fine.
const MULTIPLE_TOL: f64 = 1e-9;

impl BrownianPath {
    pub fn new(seed: u64, dt_fine: f64, n_modes: usize) -> Result<Self> {
        if !(dt_fine > 0.0 && dt_fine.is_finite()) {
            return Err(invalid(format!("dt_fine must be positive, got {dt_fine}")));
        }
        Ok(BrownianPath {
            seed,
            dt_fine,
            n_modes,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Number of fine steps per coarse step of size dt.
    pub fn ratio(&self, dt: f64) -> Result<u64> {
        let r = dt / self.dt_fine;
        let m = r.round();
        if m < 1.0 || (r - m).abs() > MULTIPLE_TOL * m {
            return Err(Error::CommonNoise(format!(
                "dt = {dt:e} is not a positive integer multiple of dt_fine = {:e}",
                self.dt_fine
            )));
        }
        Ok(m as u64)
    }

    /// Fine increments of one mode for fine steps start..start + out.len().
    pub fn fine_block(&self, mode: usize, start: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mode as u64);
        // each fine step consumes two u64 words = four u32 words
        rng.set_word_pos(start as u128 * 4);
        let scale = self.dt_fine.sqrt();
        for v in out.iter_mut() {
            let a = rng.next_u64();
            let b = rng.next_u64();
            let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
            let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            *v = scale * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
        }
    }

    /// Coarse increments ΔW_k for step `step` of size dt; `out.len()` must equal the mode count.
    pub fn increments(&self, dt: f64, step: u64, out: &mut [f64]) -> Result<()> {
        self.increments_tapped(dt, step, out, None)
    }

    /// As [`increments`](Self::increments), additionally feeding the fine increments to a tap.
    pub fn increments_tapped(
        &self,
        dt: f64,
        step: u64,
        out: &mut [f64],
        tap: Option<&mut IncrementTap>,
    ) -> Result<()> {
        if out.len() != self.n_modes {
            return Err(invalid(format!(
                "increment buffer has {} entries, model has {} modes",
                out.len(),
                self.n_modes
            )));
        }
        let r = self.ratio(dt)? as usize;
        let start = step * r as u64;
        let mut fine = vec![0.0; r * self.n_modes];
        for (mode, chunk) in fine.chunks_mut(r).enumerate() {
            self.fine_block(mode, start, chunk);
        }
        for (mode, o) in out.iter_mut().enumerate() {
            *o = fine[mode * r..(mode + 1) * r].iter().sum();
        }
        if let Some(tap) = tap {
            for j in 0..r {
                tap.absorb(start + j as u64, (0..self.n_modes).map(|m| fine[m * r + j]));
            }
        }
        Ok(())
    }
}

/// Running SHA-256 over the fine increments a consumer has drawn, in fine-step order.
#[derive(Debug, Clone)]
pub struct IncrementTap {
    hasher: Sha256,
    next_fine: u64,
}

impl Default for IncrementTap {
    fn default() -> Self {
        IncrementTap {
            hasher: Sha256::new(),
            next_fine: 0,
        }
    }
}

impl IncrementTap {
    pub fn new() -> Self {
        Self::default()
    }

    fn absorb(&mut self, fine_step: u64, values: impl Iterator<Item = f64>) {
        debug_assert_eq!(fine_step, self.next_fine, "increments consumed out of order");
        self.hasher.update(fine_step.to_le_bytes());
        for v in values {
            self.hasher.update(v.to_le_bytes());
        }
        self.next_fine = fine_step + 1;
    }

    /// Number of fine steps absorbed so far.
    pub fn fine_steps(&self) -> u64 {
        self.next_fine
    }

    pub fn hex_digest(&self) -> String {
        let digest = self.hasher.clone().finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Write increments for steps 0..steps as CSV rows (step, mode_k1, mode_k2, dW).
pub fn write_increments_csv<W: Write>(
    model: &NoiseModel,
    path: &BrownianPath,
    dt: f64,
    steps: u64,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "mode_k1", "mode_k2", "dW"])?;
    let mut dw = vec![0.0; model.len()];
    for step in 0..steps {
        path.increments(dt, step, &mut dw)?;
        for (m, v) in model.modes().iter().zip(&dw) {
            w.write_record([
                step.to_string(),
                m.k[0].to_string(),
                m.k[1].to_string(),
                format!("{v:e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Convenience wrapper matching the per-step sampling interface.
pub fn sample_increments(path: &BrownianPath, dt: f64, step: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; path.n_modes()];
    path.increments(dt, step, &mut out)?;
    Ok(out)
}
