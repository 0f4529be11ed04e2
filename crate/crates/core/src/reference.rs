//! Pseudo-spectral solver for the stochastic vorticity equation
//!
//! dξ + div(u ξ) dt + Σ_k div(σ_k ξ) ∘ dW_k = 0,  u = K * ξ,
//!
//! Each step applies a transport-noise update, then an SSP-RK3 advection step, all
//! 2/3-dealiased. The noise update is either the exponential exp(-S·∇) of the frozen
//! step field S = Σ_k σ_k ΔW_k (Stratonovich form, the default), or an Euler–Maruyama
//! step of the Itô form followed by the exact factor exp(-(a/2)|k|^2 dt) for the
//! correction (a/2) Δξ, where Q(0) = a I. Tracers can be advected through the computed
//! velocity with the same Brownian increments.

use rustfft::num_complex::Complex64;

use crate::dynamics::{Integrator, TracerTrajectory};
use crate::error::{invalid, Error, Result};
use crate::fft::{wavenumber, Fft2};
use crate::field::{VelocityField, VorticityField};
use crate::noise::{BrownianPath, IncrementTap, NoiseModel, NoiseScratch};
use crate::torus::{TorusGrid, TorusPoint};

/// Relative tolerance on the initial mean, in units of the L1 norm.
const MEAN_TOL: f64 = 1e-8;

/// Largest |S·k| handled by one Taylor expansion of the exponential noise step; the
/// partial sums lose at most about e^θ / √(2πθ) in relative precision.
const THETA_MAX: f64 = 8.0;
/// Truncation target for the Taylor remainder θ^{M+1} / (M+1)!.
const TAYLOR_TOL: f64 = 1e-15;

/// Time discretization of the transport-noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStep {
    /// ξ ← exp(-S·∇) ξ with S = Σ σ_k ΔW_k frozen over the step.
    #[default]
    Exponential,
    /// ξ ← exp((a/2) Δ dt) (ξ - S·∇ξ).
    ItoEuler,
}

/// Grid and time stepping parameters of the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReferenceConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub save_every: usize,
    #[serde(default)]
    pub noise_step: NoiseStep,
}

impl ReferenceConfig {
    pub fn n_steps(&self) -> Result<u64> {
        crate::dynamics::SimulationConfig {
            dt: self.dt,
            t_end: self.t_end,
            integrator: Integrator::EulerMaruyama,
            tv_bound: f64::INFINITY,
            save_every: self.save_every,
        }
        .n_steps()
    }
}

/// Saved vorticity fields of a run.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub snapshots: Vec<VorticityField>,
    pub noise_checksum: String,
}

impl ReferenceRun {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(VorticityField::time).collect()
    }

    pub fn final_field(&self) -> &VorticityField {
        self.snapshots.last().expect("run has at least the initial field")
    }

    pub fn at(&self, t: f64) -> Option<&VorticityField> {
        self.snapshots.iter().find(|f| (f.time() - t).abs() <= 1e-9)
    }
}

/// Precomputed spectral operators for one grid size.
pub struct ReferenceSolver<'a> {
    noise: &'a NoiseModel,
    path: &'a BrownianPath,
    config: ReferenceConfig,
    fft: Fft2,
    grid: TorusGrid,
    k1: Vec<f64>,
    k2: Vec<f64>,
    keep: Vec<bool>,
    damp: Vec<f64>,
    /// ε and the velocity multipliers ρ̂(ε|k|) when solving the mollified equation.
    mollifier: Option<(f64, Vec<f64>)>,
}

type Spectrum = Vec<Complex64>;

fn zeros(len: usize) -> Spectrum {
    vec![Complex64::new(0.0, 0.0); len]
}

impl<'a> ReferenceSolver<'a> {
    pub fn new(noise: &'a NoiseModel, path: &'a BrownianPath, config: ReferenceConfig) -> Result<Self> {
        config.n_steps()?;
        if config.save_every == 0 {
            return Err(invalid("save_every must be at least 1"));
        }
        let n = config.n;
        if n < 8 || n % 2 != 0 {
            return Err(invalid(format!("reference grid must be even and at least 8, got {n}")));
        }
        if !noise.is_transverse() {
            return Err(invalid("reference solver requires divergence-free noise modes"));
        }
        if path.n_modes() != noise.len() {
            return Err(invalid(format!(
                "Brownian path has {} streams but the noise model has {} modes",
                path.n_modes(),
                noise.len()
            )));
        }
        let a = if noise.is_empty() {
            0.0
        } else {
            path.ratio(config.dt)?;
            noise.isotropic_variance()?
        };
        let kc = (n / 3) as i64;
        if noise.lattice_kmax() as i64 > kc {
            return Err(invalid(format!(
                "noise modes up to |k| = {} are not resolved by the dealiased n = {n} grid",
                noise.lattice_kmax()
            )));
        }
        let len = n * n;
        let (mut k1, mut k2) = (vec![0.0; len], vec![0.0; len]);
        let mut keep = vec![false; len];
        let mut damp = vec![0.0; len];
        for m1 in 0..n {
            for m2 in 0..n {
                let (a1, a2) = (wavenumber(m1, n), wavenumber(m2, n));
                let idx = m1 * n + m2;
                k1[idx] = a1 as f64;
                k2[idx] = a2 as f64;
                keep[idx] = a1.abs() <= kc && a2.abs() <= kc;
                damp[idx] = match config.noise_step {
                    NoiseStep::ItoEuler => (-0.5 * a * ((a1 * a1 + a2 * a2) as f64) * config.dt).exp(),
                    NoiseStep::Exponential => 1.0,
                };
            }
        }
        Ok(ReferenceSolver {
            noise,
            path,
            config,
            fft: Fft2::new(n),
            grid: TorusGrid::new(n)?,
            k1,
            k2,
            keep,
            damp,
            mollifier: None,
        })
    }

    /// Solve the regularized equation with u = K^ε * ξ instead of K * ξ.
    pub fn with_mollifier(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < std::f64::consts::PI) {
            return Err(invalid(format!("eps must lie in (0, π), got {eps}")));
        }
        let m = crate::kernels::Mollifier::new(eps);
        let mult = self
            .k1
            .iter()
            .zip(&self.k2)
            .map(|(a, b)| m.transform(a.hypot(*b)))
            .collect();
        self.mollifier = Some((eps, mult));
        Ok(self)
    }

    /// Mollification scale of the velocity, if any.
    pub fn eps(&self) -> Option<f64> {
        self.mollifier.as_ref().map(|(e, _)| *e)
    }

    pub fn config(&self) -> &ReferenceConfig {
        &self.config
    }

    /// Largest stable step for the given velocity sup-norm.
    pub fn cfl_bound(&self, u_sup: f64) -> f64 {
        self.grid.spacing() / (2.0 * u_sup + self.noise.sup_sum())
    }

    pub fn solve(&self, initial: &VorticityField) -> Result<ReferenceRun> {
        Ok(self.run(initial, None)?.0)
    }

    /// Solve and move tracers with dX = u(X) dt + Σ σ_k(X) ∘ dW_k on the same increments.
    pub fn solve_with_tracers(
        &self,
        initial: &VorticityField,
        tracers: &[TorusPoint],
        integrator: Integrator,
    ) -> Result<(ReferenceRun, TracerTrajectory)> {
        if tracers.is_empty() {
            return Err(invalid("need at least one tracer"));
        }
        let (run, tr) = self.run(initial, Some((tracers, integrator)))?;
        Ok((run, tr.expect("tracers were requested")))
    }

    fn to_grid(&self, c: &[Complex64]) -> Vec<f64> {
        let mut buf = c.to_vec();
        self.fft.inverse_normalized(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    fn from_grid(&self, v: &[f64]) -> Spectrum {
        let mut buf: Spectrum = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    fn velocity(&self, c: &[Complex64]) -> VelocityField {
        match &self.mollifier {
            None => crate::field::velocity_from_coefficients(&self.fft, c),
            Some((_, m)) => {
                let scaled: Spectrum = c.iter().zip(m).map(|(z, r)| z * r).collect();
                crate::field::velocity_from_coefficients(&self.fft, &scaled)
            }
        }
    }

    /// Masked -div(f ξ) for grid vector field f. Both flux components go through one
    /// complex transform as f1 ξ + i f2 ξ.
    fn flux_divergence(&self, f1: &[f64], f2: &[f64], xi: &[f64]) -> Spectrum {
        let n = self.config.n;
        let mut z: Spectrum = f1
            .iter()
            .zip(f2)
            .zip(xi)
            .map(|((a, b), x)| Complex64::new(a * x, b * x))
            .collect();
        self.fft.forward(&mut z);
        let mut out = zeros(z.len());
        for m1 in 0..n {
            let r1 = (n - m1) % n;
            for m2 in 0..n {
                let idx = m1 * n + m2;
                if !self.keep[idx] {
                    continue;
                }
                let zc = z[r1 * n + (n - m2) % n].conj();
                let h1 = 0.5 * (z[idx] + zc);
                let h2 = Complex64::new(0.0, -0.5) * (z[idx] - zc);
                out[idx] = -Complex64::i() * (self.k1[idx] * h1 + self.k2[idx] * h2);
            }
        }
        out
    }

    fn advection_rhs(&self, c: &[Complex64]) -> Spectrum {
        let u = self.velocity(c);
        let xi = self.to_grid(c);
        self.flux_divergence(&u.u1, &u.u2, &xi)
    }

    fn noise_update(&self, c: &mut Spectrum, dw: &[f64]) {
        let n = self.config.n;
        let [mut f1, mut f2] = self.noise.field_coefficients(dw, n);
        self.fft.inverse_normalized(&mut f1);
        self.fft.inverse_normalized(&mut f2);
        let mut s1: Vec<f64> = f1.iter().map(|z| z.re).collect();
        let mut s2: Vec<f64> = f2.iter().map(|z| z.re).collect();
        match self.config.noise_step {
            NoiseStep::ItoEuler => {
                let xi = self.to_grid(c);
                let dn = self.flux_divergence(&s1, &s2, &xi);
                for (z, d) in c.iter_mut().zip(&dn) {
                    *z += d;
                }
            }
            NoiseStep::Exponential => {
                // |S·k| <= (|S1| + |S2|) max|k|∞ bounds the phase of every kept mode
                let smax = s1.iter().zip(&s2).fold(0.0f64, |m, (a, b)| m.max(a.abs() + b.abs()));
                let theta = smax * (n / 3) as f64;
                if theta == 0.0 {
                    return;
                }
                let sub = (theta / THETA_MAX).ceil();
                let theta = theta / sub;
                s1.iter_mut().chain(s2.iter_mut()).for_each(|v| *v /= sub);
                let mut terms = 0;
                let mut rem = theta;
                while rem > TAYLOR_TOL {
                    terms += 1;
                    rem *= theta / (terms + 1) as f64;
                }
                for _ in 0..sub as usize {
                    let mut term = c.clone();
                    for m in 1..=terms {
                        let xi = self.to_grid(&term);
                        term = self.flux_divergence(&s1, &s2, &xi);
                        let inv = 1.0 / m as f64;
                        for (z, t) in c.iter_mut().zip(term.iter_mut()) {
                            *t *= inv;
                            *z += *t;
                        }
                    }
                }
            }
        }
    }

    fn check_finite(c: &[Complex64], step: u64, t: f64) -> Result<()> {
        if c.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Diverged {
                step,
                t,
                detail: "non-finite spectral coefficient".into(),
            })
        }
    }

    fn run(
        &self,
        initial: &VorticityField,
        tracers: Option<(&[TorusPoint], Integrator)>,
    ) -> Result<(ReferenceRun, Option<TracerTrajectory>)> {
        let n = self.config.n;
        let dt = self.config.dt;
        let n_steps = self.config.n_steps()?;
        let init = initial.resample(n)?;
        let mean = init.integral();
        if mean.abs() > MEAN_TOL * init.l1_norm().max(1.0) {
            return Err(Error::NonZeroMean(mean / self.grid.cell_area() / (n * n) as f64));
        }
        let mut c = self.from_grid(init.values());
        for (z, &k) in c.iter_mut().zip(&self.keep) {
            if !k {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        c[0] = Complex64::new(0.0, 0.0);

        let mut tap = IncrementTap::new();
        let mut dw = vec![0.0; self.noise.len()];
        let mut weights = Vec::new();
        let mut scratch = NoiseScratch::default();
        let field_at = |c: &[Complex64], t: f64| VorticityField::from_values(n, self.to_grid(c), t);
        let mut snapshots = vec![field_at(&c, 0.0)?];
        let mut tracer_now = tracers.map(|(t, _)| t.to_vec());
        let mut tracer_traj = tracers.map(|(t, _)| TracerTrajectory {
            times: vec![0.0],
            positions: vec![t.to_vec()],
        });
        let mut u_now = self.velocity(&c);

        for step in 0..n_steps {
            let t0 = step as f64 * dt;
            let bound = self.cfl_bound(u_now.sup_norm());
            if dt > bound {
                return Err(Error::Cfl {
                    t: t0,
                    dt,
                    bound,
                    suggested: 0.5 * bound,
                });
            }
            if !self.noise.is_empty() {
                self.path.increments_tapped(dt, step, &mut dw, Some(&mut tap))?;
            }

            if !self.noise.is_empty() {
                self.noise_update(&mut c, &dw);
            }

            // SSP-RK3 advection
            let l0 = self.advection_rhs(&c);
            let c1: Spectrum = c.iter().zip(&l0).map(|(a, l)| a + l * dt).collect();
            let l1 = self.advection_rhs(&c1);
            let c2: Spectrum = c
                .iter()
                .zip(c1.iter().zip(&l1))
                .map(|(a, (b, l))| 0.75 * a + 0.25 * (b + l * dt))
                .collect();
            let l2 = self.advection_rhs(&c2);
            for (idx, z) in c.iter_mut().enumerate() {
                let next = (1.0 / 3.0) * *z + (2.0 / 3.0) * (c2[idx] + l2[idx] * dt);
                *z = next * self.damp[idx];
            }
            let t = (step + 1) as f64 * dt;
            Self::check_finite(&c, step, t)?;
            let u_next = self.velocity(&c);

            if let (Some(now), Some((_, integrator))) = (tracer_now.as_mut(), tracers) {
                self.noise.weights(&dw, &mut weights);
                let mut moved = Vec::with_capacity(now.len());
                for &x in now.iter() {
                    let u0 = u_now.interpolate(x);
                    let s0 = self.noise.displacement(x, &weights, &mut scratch);
                    let step0 = [u0[0] * dt + s0[0], u0[1] * dt + s0[1]];
                    let y = match integrator {
                        Integrator::EulerMaruyama => x.translate(step0),
                        Integrator::HeunStratonovich => {
                            let p = x.translate(step0);
                            let u1 = u_next.interpolate(p);
                            let s1 = self.noise.displacement(p, &weights, &mut scratch);
                            x.translate([
                                0.5 * (step0[0] + u1[0] * dt + s1[0]),
                                0.5 * (step0[1] + u1[1] * dt + s1[1]),
                            ])
                        }
                    };
                    if !(y.x1().is_finite() && y.x2().is_finite()) {
                        return Err(Error::Diverged {
                            step,
                            t,
                            detail: "tracer left the torus".into(),
                        });
                    }
                    moved.push(y);
                }
                *now = moved;
            }
            u_now = u_next;

            if (step + 1) % self.config.save_every as u64 == 0 || step + 1 == n_steps {
                snapshots.push(field_at(&c, t)?);
                if let (Some(tt), Some(now)) = (tracer_traj.as_mut(), tracer_now.as_ref()) {
                    tt.times.push(t);
                    tt.positions.push(now.clone());
                }
            }
        }
        Ok((
            ReferenceRun {
                snapshots,
                noise_checksum: tap.hex_digest(),
            },
            tracer_traj,
        ))
    }
}
