//! The regularized point-vortex system with common transport noise, and passive tracers
//! advected by the velocity it generates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::MollifiedKernel;
use crate::metrics::SignedAtomicMeasure;
use crate::noise::{BrownianPath, IncrementTap, NoiseModel, NoiseScratch};
use crate::torus::{reduce_diff, TorusDisplacement, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    EulerMaruyama,
    HeunStratonovich,
}

/// N point vortices: positions, constant intensities ξ^i, mollification scale and time.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexEnsemble {
    positions: Vec<TorusPoint>,
    intensities: Vec<f64>,
    eps: f64,
    t: f64,
}

impl VortexEnsemble {
    /// Rejects mismatched lengths and ensembles with (1/N) Σ |ξ^i| above `tv_bound`.
    pub fn new(positions: Vec<TorusPoint>, intensities: Vec<f64>, eps: f64, tv_bound: f64) -> Result<Self> {
        if positions.len() != intensities.len() {
            return Err(invalid("positions and intensities differ in length"));
        }
        if intensities.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite intensity"));
        }
        let e = VortexEnsemble {
            positions,
            intensities,
            eps,
            t: 0.0,
        };
        let tv = e.tv_norm();
        if tv > tv_bound * (1.0 + 1e-12) {
            return Err(Error::MassBound { tv, bound: tv_bound });
        }
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[TorusPoint] {
        &self.positions
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// (1/N) Σ |ξ^i|.
    pub fn tv_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.intensities.iter().map(|x| x.abs()).sum::<f64>() / self.len() as f64
    }

    /// S^N = (1/N) Σ ξ^i δ_{X^i}.
    pub fn empirical_measure(&self) -> SignedAtomicMeasure {
        let inv = 1.0 / self.len().max(1) as f64;
        SignedAtomicMeasure::new(
            self.positions
                .iter()
                .copied()
                .zip(self.intensities.iter().map(|x| x * inv)),
        )
    }

    /// Reorder particles: entry k of the result is particle `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        VortexEnsemble {
            positions: perm.iter().map(|&i| self.positions[i]).collect(),
            intensities: perm.iter().map(|&i| self.intensities[i]).collect(),
            eps: self.eps,
            t: self.t,
        }
    }
}

/// Time stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Total-variation budget M for the ensemble.
    pub tv_bound: f64,
    /// Keep a snapshot every this many steps (the final state is always kept).
    pub save_every: usize,
}

impl SimulationConfig {
    /// Number of steps, requiring dt to divide the horizon within 1e-12.
    pub fn n_steps(&self) -> Result<u64> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return Err(invalid(format!("need dt > 0 and T >= 0, got dt = {}, T = {}", self.dt, self.t_end)));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-12 {
            return Err(invalid(format!("dt = {} does not divide T = {}", self.dt, self.t_end)));
        }
        Ok(n as u64)
    }
}

/// How the kernel is evaluated inside the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelEval {
    /// Bilinear interpolation from the precomputed table.
    Table,
    /// Direct Fourier series (slow, for oracles).
    Series,
}

/// Snapshots of an ensemble run plus the checksum of the increments it consumed.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<VortexEnsemble>,
    pub noise_checksum: String,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &VortexEnsemble {
        self.snapshots.last().expect("trajectory has at least the initial state")
    }

    /// Snapshot at time t (within 1e-9).
    pub fn at(&self, t: f64) -> Option<&VortexEnsemble> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9)
    }

    pub fn empirical_measure(&self, t: f64) -> Option<SignedAtomicMeasure> {
        self.at(t).map(VortexEnsemble::empirical_measure)
    }
}

/// Passive tracer positions at the snapshot times of the driving run.
#[derive(Debug, Clone)]
pub struct TracerTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<TorusPoint>>,
}

/// Sources of the interaction sum, sorted by (x1, x2, ξ) so that the summation order
/// depends only on the set of particles and not on their labels.
struct Sources {
    x1: Vec<f64>,
    x2: Vec<f64>,
    w: Vec<f64>,
    label: Vec<usize>,
}

impl Sources {
    fn new(positions: &[TorusPoint], intensities: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| {
            positions[a]
                .x1()
                .total_cmp(&positions[b].x1())
                .then_with(|| positions[a].x2().total_cmp(&positions[b].x2()))
                .then_with(|| intensities[a].total_cmp(&intensities[b]))
        });
        Sources {
            x1: order.iter().map(|&i| positions[i].x1()).collect(),
            x2: order.iter().map(|&i| positions[i].x2()).collect(),
            w: order.iter().map(|&i| intensities[i]).collect(),
            label: order,
        }
    }
}

/// The particle system bound to a kernel, a noise model and a Brownian path.
pub struct Dynamics<'a> {
    kernel: &'a MollifiedKernel,
    noise: &'a NoiseModel,
    path: &'a BrownianPath,
    config: SimulationConfig,
    eval: KernelEval,
    needs_correction: bool,
}

/// Velocity contributions of one step: drift and noise displacement per point.
struct Increments {
    drift: Vec<[f64; 2]>,
    noise: Vec<[f64; 2]>,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        kernel: &'a MollifiedKernel,
        noise: &'a NoiseModel,
        path: &'a BrownianPath,
        config: SimulationConfig,
    ) -> Result<Self> {
        config.n_steps()?;
        if config.save_every == 0 {
            return Err(invalid("save_every must be at least 1"));
        }
        if path.n_modes() != noise.len() {
            return Err(invalid(format!(
                "Brownian path has {} streams but the noise model has {} modes",
                path.n_modes(),
                noise.len()
            )));
        }
        if !noise.is_empty() {
            path.ratio(config.dt)?;
        }
        Ok(Dynamics {
            kernel,
            noise,
            path,
            config,
            eval: KernelEval::Table,
            needs_correction: !noise.is_transverse(),
        })
    }

    /// Switch kernel evaluation mode.
    pub fn with_kernel_eval(mut self, eval: KernelEval) -> Self {
        self.eval = eval;
        self
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn kernel(&self) -> &MollifiedKernel {
        self.kernel
    }

    #[inline]
    fn kernel_at(&self, d1: f64, d2: f64) -> [f64; 2] {
        match self.eval {
            KernelEval::Table => self.kernel.eval(d1, d2),
            KernelEval::Series => self.kernel.eval_series(TorusDisplacement { d1, d2 }),
        }
    }

    /// (1/N) Σ_j ξ^j K^ε(x - X^j), skipping the source labelled `skip`.
    fn velocity_from(&self, x: TorusPoint, src: &Sources, skip: usize, inv_n: f64) -> [f64; 2] {
        let (x1, x2) = (x.x1(), x.x2());
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        for k in 0..src.w.len() {
            if src.label[k] == skip {
                continue;
            }
            let d1 = reduce_diff(x1 - src.x1[k]);
            let d2 = reduce_diff(x2 - src.x2[k]);
            let kv = self.kernel_at(d1, d2);
            a1 += src.w[k] * kv[0];
            a2 += src.w[k] * kv[1];
        }
        [a1 * inv_n, a2 * inv_n]
    }

    fn drift_of(&self, positions: &[TorusPoint], intensities: &[f64]) -> Vec<[f64; 2]> {
        debug_assert_eq!(self.kernel_at(0.0, 0.0), [0.0, 0.0]);
        let src = Sources::new(positions, intensities);
        let inv_n = 1.0 / positions.len().max(1) as f64;
        let out: Vec<[f64; 2]> = positions
            .par_iter()
            .enumerate()
            .map(|(i, &x)| self.velocity_from(x, &src, i, inv_n))
            .collect();
        #[cfg(debug_assertions)]
        {
            let (mut s1, mut s2, mut scale) = (0.0, 0.0, 0.0);
            for (w, v) in intensities.iter().zip(&out) {
                s1 += w * v[0];
                s2 += w * v[1];
                scale += w.abs() * (v[0].abs() + v[1].abs());
            }
            let tol = 1e-12 * scale.max(1.0) * (positions.len() as f64).sqrt().max(1.0);
            debug_assert!(s1.abs() <= tol && s2.abs() <= tol, "weighted drift sum ({s1}, {s2})");
        }
        out
    }

    fn tracer_drift(&self, tracers: &[TorusPoint], positions: &[TorusPoint], intensities: &[f64]) -> Vec<[f64; 2]> {
        let src = Sources::new(positions, intensities);
        let inv_n = 1.0 / positions.len().max(1) as f64;
        tracers
            .par_iter()
            .map(|&x| self.velocity_from(x, &src, usize::MAX, inv_n))
            .collect()
    }

    /// Interaction drift of every particle.
    pub fn drift(&self, ens: &VortexEnsemble) -> Vec<[f64; 2]> {
        self.drift_of(&ens.positions, &ens.intensities)
    }

    /// Velocity b(x, S^N) felt by passive points.
    pub fn velocity_at(&self, points: &[TorusPoint], ens: &VortexEnsemble) -> Vec<[f64; 2]> {
        self.tracer_drift(points, &ens.positions, &ens.intensities)
    }

    fn noise_of(&self, points: &[TorusPoint], weights: &[[f64; 2]]) -> Vec<[f64; 2]> {
        if self.noise.is_empty() {
            return vec![[0.0; 2]; points.len()];
        }
        points
            .par_iter()
            .map_init(NoiseScratch::default, |scratch, &x| {
                self.noise.displacement(x, weights, scratch)
            })
            .collect()
    }

    fn add_correction(&self, points: &[TorusPoint], drift: &mut [[f64; 2]]) {
        if self.needs_correction {
            for (x, b) in points.iter().zip(drift.iter_mut()) {
                let c = self.noise.strat_correction(*x);
                b[0] += c[0];
                b[1] += c[1];
            }
        }
    }

    fn increments_for(&self, step: u64, tap: Option<&mut IncrementTap>) -> Result<Vec<[f64; 2]>> {
        let mut weights = Vec::new();
        if !self.noise.is_empty() {
            let mut dw = vec![0.0; self.noise.len()];
            self.path.increments_tapped(self.config.dt, step, &mut dw, tap)?;
            self.noise.weights(&dw, &mut weights);
        }
        Ok(weights)
    }

    fn advance(points: &[TorusPoint], inc: &Increments, dt: f64) -> Vec<TorusPoint> {
        points
            .iter()
            .zip(inc.drift.iter().zip(&inc.noise))
            .map(|(x, (b, n))| x.translate([b[0] * dt + n[0], b[1] * dt + n[1]]))
            .collect()
    }

    fn average(points: &[TorusPoint], a: &Increments, b: &Increments, dt: f64) -> Vec<TorusPoint> {
        points
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let d1 = 0.5 * (a.drift[i][0] + b.drift[i][0]) * dt + 0.5 * (a.noise[i][0] + b.noise[i][0]);
                let d2 = 0.5 * (a.drift[i][1] + b.drift[i][1]) * dt + 0.5 * (a.noise[i][1] + b.noise[i][1]);
                x.translate([d1, d2])
            })
            .collect()
    }

    /// One step for the ensemble and, optionally, a set of tracers driven by it.
    fn step_with(
        &self,
        positions: &[TorusPoint],
        intensities: &[f64],
        tracers: Option<&[TorusPoint]>,
        weights: &[[f64; 2]],
    ) -> (Vec<TorusPoint>, Option<Vec<TorusPoint>>) {
        let dt = self.config.dt;
        let mut drift = self.drift_of(positions, intensities);
        let noise = self.noise_of(positions, weights);
        let tracer_inc = tracers.map(|t| Increments {
            drift: self.tracer_drift(t, positions, intensities),
            noise: self.noise_of(t, weights),
        });
        match self.config.integrator {
            Integrator::EulerMaruyama => {
                self.add_correction(positions, &mut drift);
                let inc = Increments { drift, noise };
                let next = Self::advance(positions, &inc, dt);
                let next_tracers = tracers.zip(tracer_inc).map(|(t, mut ti)| {
                    self.add_correction(t, &mut ti.drift);
                    Self::advance(t, &ti, dt)
                });
                (next, next_tracers)
            }
            Integrator::HeunStratonovich => {
                let inc0 = Increments { drift, noise };
                let pred = Self::advance(positions, &inc0, dt);
                let inc1 = Increments {
                    drift: self.drift_of(&pred, intensities),
                    noise: self.noise_of(&pred, weights),
                };
                let next = Self::average(positions, &inc0, &inc1, dt);
                let next_tracers = tracers.zip(tracer_inc).map(|(t, ti0)| {
                    let tpred = Self::advance(t, &ti0, dt);
                    let ti1 = Increments {
                        drift: self.tracer_drift(&tpred, &pred, intensities),
                        noise: self.noise_of(&tpred, weights),
                    };
                    Self::average(t, &ti0, &ti1, dt)
                });
                (next, next_tracers)
            }
        }
    }

    fn check_finite(points: &[TorusPoint], step: u64, t: f64) -> Result<()> {
        if let Some(p) = points.iter().find(|p| !p.x1().is_finite() || !p.x2().is_finite()) {
            return Err(Error::Diverged {
                step,
                t,
                detail: format!("position ({}, {})", p.x1(), p.x2()),
            });
        }
        Ok(())
    }

    /// Advance one step of size dt; `step_index` selects the Brownian increment.
    pub fn step(&self, ens: &VortexEnsemble, step_index: u64) -> Result<VortexEnsemble> {
        let weights = self.increments_for(step_index, None)?;
        let (next, _) = self.step_with(&ens.positions, &ens.intensities, None, &weights);
        let t = (step_index + 1) as f64 * self.config.dt;
        Self::check_finite(&next, step_index, t)?;
        Ok(VortexEnsemble {
            positions: next,
            intensities: ens.intensities.clone(),
            eps: ens.eps,
            t,
        })
    }

    /// Run from `initial` (taken to be at t = 0) to the horizon.
    pub fn simulate(&self, initial: &VortexEnsemble) -> Result<Trajectory> {
        Ok(self.run(initial, None)?.0)
    }

    /// Run the ensemble and advect tracers alongside with the same increments.
    pub fn simulate_with_tracers(
        &self,
        initial: &VortexEnsemble,
        tracers: &[TorusPoint],
    ) -> Result<(Trajectory, TracerTrajectory)> {
        if tracers.is_empty() {
            return Err(invalid("need at least one tracer"));
        }
        let (traj, tr) = self.run(initial, Some(tracers))?;
        Ok((traj, tr.expect("tracers were requested")))
    }

    fn run(
        &self,
        initial: &VortexEnsemble,
        tracers: Option<&[TorusPoint]>,
    ) -> Result<(Trajectory, Option<TracerTrajectory>)> {
        let n_steps = self.config.n_steps()?;
        let mut tap = IncrementTap::new();
        let mut state = initial.clone();
        state.t = 0.0;
        let mut snapshots = vec![state.clone()];
        let mut tracer_now = tracers.map(|t| t.to_vec());
        let mut tracer_traj = tracers.map(|t| TracerTrajectory {
            times: vec![0.0],
            positions: vec![t.to_vec()],
        });
        for step in 0..n_steps {
            let weights = self.increments_for(step, Some(&mut tap))?;
            let (next, next_tracers) =
                self.step_with(&state.positions, &state.intensities, tracer_now.as_deref(), &weights);
            let t = (step + 1) as f64 * self.config.dt;
            Self::check_finite(&next, step, t)?;
            state.positions = next;
            state.t = t;
            if let Some(nt) = next_tracers {
                Self::check_finite(&nt, step, t)?;
                tracer_now = Some(nt);
            }
            let save = (step + 1) % self.config.save_every as u64 == 0 || step + 1 == n_steps;
            if save {
                snapshots.push(state.clone());
                if let (Some(tt), Some(now)) = (tracer_traj.as_mut(), tracer_now.as_ref()) {
                    tt.times.push(t);
                    tt.positions.push(now.clone());
                }
            }
        }
        Ok((
            Trajectory {
                snapshots,
                noise_checksum: tap.hex_digest(),
            },
            tracer_traj,
        ))
    }

    /// Advect tracers through a previously recorded trajectory. The trajectory must hold
    /// every step (save_every = 1) and must come from this configuration.
    pub fn advect_tracers(&self, tracers: &[TorusPoint], traj: &Trajectory) -> Result<TracerTrajectory> {
        if tracers.is_empty() {
            return Err(invalid("need at least one tracer"));
        }
        let n_steps = self.config.n_steps()?;
        if traj.snapshots.len() as u64 != n_steps + 1 {
            return Err(invalid("tracer advection needs a trajectory saved at every step"));
        }
        let dt = self.config.dt;
        let mut now = tracers.to_vec();
        let mut out = TracerTrajectory {
            times: vec![0.0],
            positions: vec![now.clone()],
        };
        for step in 0..n_steps {
            let ens = &traj.snapshots[step as usize];
            let weights = self.increments_for(step, None)?;
            let ti0 = Increments {
                drift: self.tracer_drift(&now, &ens.positions, &ens.intensities),
                noise: self.noise_of(&now, &weights),
            };
            now = match self.config.integrator {
                Integrator::EulerMaruyama => {
                    let mut ti0 = ti0;
                    self.add_correction(&now, &mut ti0.drift);
                    Self::advance(&now, &ti0, dt)
                }
                Integrator::HeunStratonovich => {
                    let inc0 = Increments {
                        drift: self.drift_of(&ens.positions, &ens.intensities),
                        noise: self.noise_of(&ens.positions, &weights),
                    };
                    let pred = Self::advance(&ens.positions, &inc0, dt);
                    let tpred = Self::advance(&now, &ti0, dt);
                    let ti1 = Increments {
                        drift: self.tracer_drift(&tpred, &pred, &ens.intensities),
                        noise: self.noise_of(&tpred, &weights),
                    };
                    Self::average(&now, &ti0, &ti1, dt)
                }
            };
            let t = (step + 1) as f64 * dt;
            Self::check_finite(&now, step, t)?;
            if (step + 1) % self.config.save_every as u64 == 0 || step + 1 == n_steps {
                out.times.push(t);
                out.positions.push(now.clone());
            }
        }
        Ok(out)
    }
}
