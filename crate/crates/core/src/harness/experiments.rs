use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Check, Group, RateReport, Row};
use super::schedule::EpsSchedule;
use super::stats::{ls_slope, mean, sign_test_p, stderr, variance};
use crate::config::{Config, FlowProxy};
use crate::dynamics::{Dynamics, Integrator, TracerTrajectory, VortexEnsemble};
use crate::error::{invalid, Error, Result};
use crate::kernels::{kernel_l1_diff, MollifiedKernel};
use crate::metrics::{w1_dual_ascent, w1_solve, MetricMode, SignedAtomicMeasure, MAX_EXACT_ATOMS};
use crate::noise::NoiseModel;
use crate::reference::ReferenceSolver;
use crate::sampling::{initial_ensemble, measure_zeta, InitialVorticity};
use crate::torus::{torus_dist, TorusGrid, TorusPoint};

/// Added to the seed of the particle run in the decoupled ablation.
pub const DECOUPLED_SEED_SHIFT: u64 = 1 << 32;

/// Time lookup tolerance.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Regularized,
    Mollification,
    Full,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Regularized => "regularized",
            Experiment::Mollification => "mollification",
            Experiment::Full => "full",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regularized" => Ok(Experiment::Regularized),
            "mollification" => Ok(Experiment::Mollification),
            "full" => Ok(Experiment::Full),
            other => Err(invalid(format!("unknown experiment `{other}`"))),
        }
    }
}

pub fn run(cfg: &Config, experiment: Experiment) -> Result<RateReport> {
    match experiment {
        Experiment::Regularized => run_regularized(cfg),
        Experiment::Mollification => run_mollification(cfg),
        Experiment::Full => run_full(cfg),
    }
}

/// W1 in the configured mode. Above the exact-solver limit the BL distance is the
/// midpoint of the dual-ascent bracket.
pub fn distance(mu: &SignedAtomicMeasure, nu: &SignedAtomicMeasure, mode: MetricMode, tol: f64) -> Result<f64> {
    if mode == MetricMode::Bl && mu.len() + nu.len() > MAX_EXACT_ATOMS {
        let b = w1_dual_ascent(mu, nu, tol)?;
        return Ok(0.5 * (b.lower + b.upper));
    }
    Ok(w1_solve(mu, nu, mode)?.value)
}

/// Snapshot stride that lands on every sample time.
pub fn save_every(times: &[f64], dt: f64) -> Result<usize> {
    if times.is_empty() {
        return Err(invalid("need at least one sample time"));
    }
    let mut g = 0u64;
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) {
            return Err(invalid(format!("sample times must be positive and increasing, got {times:?}")));
        }
        prev = t;
        let k = (t / dt).round();
        if (k * dt - t).abs() > TIME_TOL {
            return Err(invalid(format!("sample time {t} is not a multiple of dt = {dt}")));
        }
        g = gcd(g, k as u64);
    }
    Ok(g as usize)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn time_index(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|s| (s - t).abs() <= TIME_TOL)
        .ok_or_else(|| invalid(format!("no snapshot at t = {t}")))
}

fn sup_over_times(rows: &[Row]) -> f64 {
    rows.iter().map(|r| r.d1).fold(0.0, f64::max)
}

/// Per-seed sup over sample times of the rows in one cell, in seed order.
fn per_seed_sup(rows: &[Row], seeds: &[u64]) -> Vec<f64> {
    seeds
        .iter()
        .map(|&s| sup_over_times(&rows.iter().filter(|r| r.seed == s).copied().collect::<Vec<_>>()))
        .collect()
}

fn group(label: String, n: usize, eps: f64, d1: Vec<f64>) -> Group {
    Group {
        label,
        n,
        eps,
        t: None,
        zeta: None,
        kernel_l1_diff: None,
        mean: mean(&d1),
        stderr: stderr(&d1),
        d1,
    }
}

/// Every run of a seed must have consumed the same increment stream.
fn checksum_check(checksums: &BTreeMap<u64, Vec<String>>) -> Check {
    let bad: Vec<u64> = checksums
        .iter()
        .filter(|(_, v)| v.windows(2).any(|w| w[0] != w[1]))
        .map(|(s, _)| *s)
        .collect();
    let runs: usize = checksums.values().map(Vec::len).sum();
    if bad.is_empty() {
        Check::new("common_noise", true, format!("{runs} runs, one increment stream per seed"))
    } else {
        Check::new("common_noise", false, format!("seeds {bad:?} mix increment streams"))
    }
}

fn decoupled_check(coupled: &[f64], decoupled: &[f64]) -> Check {
    let (vc, vd) = (variance(coupled), variance(decoupled));
    Check::new(
        "decoupled_variance",
        vd > vc,
        format!("cross-seed d1 variance {vc:.3e} coupled vs {vd:.3e} decoupled"),
    )
}

struct Setup {
    noise: NoiseModel,
    init: InitialVorticity,
    seeds: Vec<u64>,
    horizon: f64,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let seeds = cfg.plan.seed_list();
    if seeds.is_empty() {
        return Err(invalid("plan needs at least one seed"));
    }
    Ok(Setup {
        noise: cfg.noise.model()?,
        init: cfg.init.initial()?,
        seeds,
        horizon: cfg.plan.horizon(),
    })
}

fn ensemble(cfg: &Config, init: &InitialVorticity, n: usize, eps: f64) -> Result<VortexEnsemble> {
    initial_ensemble(
        init,
        cfg.init.mode,
        n,
        cfg.init.seed,
        eps,
        cfg.particles.tv_bound,
        cfg.init.density_n,
    )
}

/// Particle runs at fixed ε against a particle proxy of the regularized PDE with
/// N_ref particles on the same noise.
pub fn run_regularized(cfg: &Config) -> Result<RateReport> {
    let s = setup(cfg)?;
    let plan = &cfg.plan;
    if plan.n_values.is_empty() {
        return Err(invalid("plan needs at least one particle count"));
    }
    let n_max = *plan.n_values.iter().max().expect("nonempty");
    if plan.n_ref < 4 * n_max {
        return Err(invalid(format!("n_ref = {} must be at least 4 x {n_max}", plan.n_ref)));
    }
    let eps = cfg.kernel.eps;
    let kernel = MollifiedKernel::new(eps, cfg.kernel.kmax, cfg.kernel.table_n)?;
    let sim = cfg
        .particles
        .simulation(s.horizon, save_every(&plan.sample_times, cfg.particles.dt)?);
    let ref0 = ensemble(cfg, &s.init, plan.n_ref, eps)?;
    let starts: Vec<VortexEnsemble> = plan
        .n_values
        .iter()
        .map(|&n| ensemble(cfg, &s.init, n, eps))
        .collect::<Result<_>>()?;
    let ref_measure = ref0.empirical_measure();
    let zetas: Vec<f64> = starts
        .iter()
        .map(|e| distance(&e.empirical_measure(), &ref_measure, cfg.metric.mode, cfg.metric.tol))
        .collect::<Result<_>>()?;
    let smallest = plan
        .n_values
        .iter()
        .enumerate()
        .min_by_key(|(_, n)| **n)
        .map(|(i, _)| i)
        .expect("nonempty");

    struct SeedOut {
        rows: Vec<Row>,
        decoupled: Vec<Row>,
        checksums: Vec<String>,
    }
    let outs: Vec<SeedOut> = s
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedOut> {
            let path = cfg.noise.path(seed, &s.noise)?;
            let dynamics = Dynamics::new(&kernel, &s.noise, &path, sim)?;
            let reference = dynamics.simulate(&ref0)?;
            let mut checksums = vec![reference.noise_checksum.clone()];
            let mut rows = Vec::new();
            let compare = |traj: &crate::dynamics::Trajectory, n: usize, seed: u64| -> Result<Vec<Row>> {
                plan.sample_times
                    .iter()
                    .map(|&t| {
                        let a = traj.empirical_measure(t).ok_or_else(|| invalid(format!("no snapshot at {t}")))?;
                        let b = reference.empirical_measure(t).expect("reference saves the same times");
                        Ok(Row {
                            n,
                            eps,
                            seed,
                            t,
                            d1: distance(&a, &b, cfg.metric.mode, cfg.metric.tol)?,
                        })
                    })
                    .collect()
            };
            for (n, start) in plan.n_values.iter().zip(&starts) {
                let traj = dynamics.simulate(start)?;
                checksums.push(traj.noise_checksum.clone());
                rows.extend(compare(&traj, *n, seed)?);
            }
            let mut decoupled = Vec::new();
            if plan.decoupled_ablation {
                let other = cfg.noise.path(seed + DECOUPLED_SEED_SHIFT, &s.noise)?;
                let traj = Dynamics::new(&kernel, &s.noise, &other, sim)?.simulate(&starts[smallest])?;
                decoupled = compare(&traj, plan.n_values[smallest], seed)?;
            }
            Ok(SeedOut {
                rows,
                decoupled,
                checksums,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = RateReport::new(Experiment::Regularized.name(), cfg.hash());
    for (seed, o) in s.seeds.iter().zip(&outs) {
        report.rows.extend_from_slice(&o.rows);
        report.checksums.insert(*seed, o.checksums.clone());
    }
    let mut per_n = Vec::new();
    for (i, &n) in plan.n_values.iter().enumerate() {
        let cell: Vec<Row> = report.rows.iter().filter(|r| r.n == n).copied().collect();
        let mut g = group(format!("N={n}"), n, eps, per_seed_sup(&cell, &s.seeds));
        g.zeta = Some(zetas[i]);
        per_n.push(g.d1.clone());
        report.groups.push(g);
    }
    let means: Vec<f64> = report.groups.iter().map(|g| g.mean).collect();
    let strictly = means.windows(2).all(|w| w[1] < w[0]);
    report.checks.push(Check::new(
        "mean_decreasing",
        strictly,
        format!("mean d1 {means:.4?} over N = {:?}", plan.n_values),
    ));
    if plan.n_values.len() >= 2 {
        let lz: Vec<f64> = zetas.iter().map(|z| z.ln()).collect();
        let ld: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        let slope = ls_slope(&lz, &ld);
        report.slopes.insert("d1_vs_zeta".into(), slope);
        report.checks.push(Check::new(
            "slope_vs_zeta",
            (0.6..=1.4).contains(&slope),
            format!("log-log slope {slope:.3} of mean d1 against zeta {zetas:.4?}, want [0.6, 1.4]"),
        ));
        for (i, w) in per_n.windows(2).enumerate() {
            let wins = w[0].iter().zip(&w[1]).filter(|(a, b)| b < a).count();
            report.diagnostics.insert(
                format!("sign_test_p_N{}_to_N{}", plan.n_values[i], plan.n_values[i + 1]),
                sign_test_p(wins, w[0].len()),
            );
        }
    }
    report.checks.push(checksum_check(&report.checksums));
    if plan.decoupled_ablation {
        let rows: Vec<Row> = outs.iter().flat_map(|o| o.decoupled.clone()).collect();
        let n = plan.n_values[smallest];
        let g = group(format!("decoupled N={n}"), n, eps, per_seed_sup(&rows, &s.seeds));
        report.checks.push(decoupled_check(&per_n[smallest], &g.d1));
        report.groups.push(g);
    }
    Ok(report)
}

/// Mean tracer displacement ∫|Φ^ε_t - Φ_t| dx, estimated on the tracer grid.
fn tracer_l1(a: &[TorusPoint], b: &[TorusPoint]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(p, q)| torus_dist(*p, *q)).sum();
    4.0 * PI * PI * s / a.len() as f64
}

/// Running sup over saved times of the tracer L1 distance, read at each sample time.
fn running_sup(reference: &TracerTrajectory, test: &TracerTrajectory, sample_times: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let ir = time_index(&reference.times, t)?;
        let mut sup = 0.0f64;
        for (i, &s) in reference.times[..=ir].iter().enumerate() {
            let j = time_index(&test.times, s)?;
            sup = sup.max(tracer_l1(&reference.positions[i], &test.positions[j]));
        }
        out.push(sup);
    }
    Ok(out)
}

/// Tracer flow of K^ε against the tracer flow of the unmollified reference solver, on
/// the same noise, regressed against ‖K^ε - K‖_L1.
pub fn run_mollification(cfg: &Config) -> Result<RateReport> {
    let s = setup(cfg)?;
    let plan = &cfg.plan;
    if plan.eps_values.len() < 2 {
        return Err(invalid(format!(
            "mollification needs at least two eps values, got {}",
            plan.eps_values.len()
        )));
    }
    if plan.tracer_side == 0 {
        return Err(invalid("tracer_side must be positive"));
    }
    let quad_n = cfg.torus.quadrature_n;
    let norms: Vec<f64> = plan
        .eps_values
        .iter()
        .map(|&e| kernel_l1_diff(&MollifiedKernel::new(e, quad_n / 2 - 1, None)?, quad_n))
        .collect::<Result<_>>()?;
    let tracers: Vec<TorusPoint> = TorusGrid::new(plan.tracer_side)?.nodes().collect();
    let m = tracers.len();
    let ref_cfg = cfg
        .reference
        .solver(s.horizon, save_every(&plan.sample_times, cfg.reference.dt)?);
    let field = s.init.to_field(cfg.reference.n)?;
    let kernels: Vec<MollifiedKernel> = match plan.flow_proxy {
        FlowProxy::Pde => Vec::new(),
        FlowProxy::Particles => plan
            .eps_values
            .iter()
            .map(|&e| MollifiedKernel::new(e, cfg.kernel.kmax, cfg.kernel.table_n))
            .collect::<Result<_>>()?,
    };
    let sim = cfg
        .particles
        .simulation(s.horizon, save_every(&plan.sample_times, cfg.particles.dt)?);

    let outs: Vec<(Vec<Row>, Vec<String>)> = s
        .seeds
        .par_iter()
        .map(|&seed| -> Result<(Vec<Row>, Vec<String>)> {
            let path = cfg.noise.path(seed, &s.noise)?;
            let solver = ReferenceSolver::new(&s.noise, &path, ref_cfg)?;
            let (run, flow) = solver.solve_with_tracers(&field, &tracers, Integrator::HeunStratonovich)?;
            let mut checksums = vec![run.noise_checksum];
            let mut rows = Vec::new();
            for (i, &eps) in plan.eps_values.iter().enumerate() {
                let flow_eps = match plan.flow_proxy {
                    FlowProxy::Pde => {
                        let (r, tr) = ReferenceSolver::new(&s.noise, &path, ref_cfg)?
                            .with_mollifier(eps)?
                            .solve_with_tracers(&field, &tracers, Integrator::HeunStratonovich)?;
                        checksums.push(r.noise_checksum);
                        tr
                    }
                    FlowProxy::Particles => {
                        let start = ensemble(cfg, &s.init, plan.n_ref, eps)?;
                        let (traj, tr) = Dynamics::new(&kernels[i], &s.noise, &path, sim)?
                            .simulate_with_tracers(&start, &tracers)?;
                        checksums.push(traj.noise_checksum);
                        tr
                    }
                };
                for (&t, d1) in plan.sample_times.iter().zip(running_sup(&flow, &flow_eps, &plan.sample_times)?) {
                    rows.push(Row { n: m, eps, seed, t, d1 });
                }
            }
            Ok((rows, checksums))
        })
        .collect::<Result<_>>()?;

    let mut report = RateReport::new(Experiment::Mollification.name(), cfg.hash());
    for (seed, (rows, sums)) in s.seeds.iter().zip(outs) {
        report.rows.extend(rows);
        report.checksums.insert(*seed, sums);
    }
    let ln_norm: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let mut exponents = Vec::new();
    for &t in &plan.sample_times {
        let mut means = Vec::new();
        for (i, &eps) in plan.eps_values.iter().enumerate() {
            let d1: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.eps == eps && r.t == t)
                .map(|r| r.d1)
                .collect();
            let mut g = group(format!("eps={eps},t={t}"), m, eps, d1);
            g.t = Some(t);
            g.kernel_l1_diff = Some(norms[i]);
            means.push(g.mean.ln());
            report.groups.push(g);
        }
        let e = ls_slope(&ln_norm, &means);
        report.slopes.insert(format!("exponent_t={t}"), e);
        exponents.push(e);
    }
    let fmt = format!("exponents {exponents:.3?} at t = {:?}", plan.sample_times);
    report.checks.push(Check::new(
        "exponent_positive",
        exponents.iter().all(|&e| e > 0.0),
        fmt.clone(),
    ));
    report.checks.push(Check::new(
        "exponent_nonincreasing",
        exponents.windows(2).all(|w| w[1] <= w[0]),
        fmt,
    ));
    report.checks.push(checksum_check(&report.checksums));
    let max_e = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.diagnostics.insert("max_exponent".into(), max_e);
    report
        .diagnostics
        .insert("exponent_at_most_one".into(), if max_e <= 1.0 { 1.0 } else { 0.0 });
    Ok(report)
}

/// Particle runs with ε(N) from the schedule against the reference solver for the
/// unmollified equation on the same noise.
pub fn run_full(cfg: &Config) -> Result<RateReport> {
    let s = setup(cfg)?;
    let plan = &cfg.plan;
    if plan.n_values.is_empty() {
        return Err(invalid("plan needs at least one particle count"));
    }
    let schedule = EpsSchedule::new(cfg.schedule.delta, cfg.schedule.lambda)?;
    let zeta_unit = if cfg.schedule.normalize_zeta {
        s.init.to_field(cfg.metric.zeta_reference_n)?.l1_norm()
    } else {
        1.0
    };
    let mut zetas = Vec::new();
    let mut eps_n = Vec::new();
    let mut starts = Vec::new();
    for &n in &plan.n_values {
        let e0 = ensemble(cfg, &s.init, n, 1.0)?;
        let zeta = measure_zeta(&e0, &s.init, cfg.metric.zeta_reference_n)?;
        let eps = schedule.eps_of_zeta(zeta / zeta_unit)?;
        zetas.push(zeta);
        eps_n.push(eps);
        starts.push(ensemble(cfg, &s.init, n, eps)?);
    }
    let kernels: Vec<MollifiedKernel> = eps_n
        .iter()
        .map(|&e| MollifiedKernel::new(e, cfg.kernel.kmax, cfg.kernel.table_n))
        .collect::<Result<_>>()?;
    let largest = plan
        .n_values
        .iter()
        .enumerate()
        .max_by_key(|(_, n)| **n)
        .map(|(i, _)| i)
        .expect("nonempty");
    let smallest = plan
        .n_values
        .iter()
        .enumerate()
        .min_by_key(|(_, n)| **n)
        .map(|(i, _)| i)
        .expect("nonempty");
    let ablation_kernel = MollifiedKernel::new(plan.ablation_eps, cfg.kernel.kmax, cfg.kernel.table_n)?;
    let ablation_start = ensemble(cfg, &s.init, plan.n_values[largest], plan.ablation_eps)?;
    let sim = cfg
        .particles
        .simulation(s.horizon, save_every(&plan.sample_times, cfg.particles.dt)?);
    let ref_cfg = cfg
        .reference
        .solver(s.horizon, save_every(&plan.sample_times, cfg.reference.dt)?);
    let field = s.init.to_field(cfg.reference.n)?;

    struct SeedOut {
        rows: Vec<Row>,
        ablation: Vec<Row>,
        decoupled: Vec<Row>,
        checksums: Vec<String>,
    }
    let outs: Vec<SeedOut> = s
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedOut> {
            let path = cfg.noise.path(seed, &s.noise)?;
            let pde = ReferenceSolver::new(&s.noise, &path, ref_cfg)?.solve(&field)?;
            let mut checksums = vec![pde.noise_checksum.clone()];
            let targets: Vec<SignedAtomicMeasure> = plan
                .sample_times
                .iter()
                .map(|&t| Ok(pde.snapshots[time_index(&pde.times(), t)?].to_measure()))
                .collect::<Result<_>>()?;
            let compare = |traj: &crate::dynamics::Trajectory, n: usize, eps: f64| -> Result<Vec<Row>> {
                plan.sample_times
                    .iter()
                    .zip(&targets)
                    .map(|(&t, target)| {
                        let a = traj.empirical_measure(t).ok_or_else(|| invalid(format!("no snapshot at {t}")))?;
                        Ok(Row {
                            n,
                            eps,
                            seed,
                            t,
                            d1: distance(&a, target, cfg.metric.mode, cfg.metric.tol)?,
                        })
                    })
                    .collect()
            };
            let mut rows = Vec::new();
            for (i, &n) in plan.n_values.iter().enumerate() {
                let traj = Dynamics::new(&kernels[i], &s.noise, &path, sim)?.simulate(&starts[i])?;
                checksums.push(traj.noise_checksum.clone());
                rows.extend(compare(&traj, n, eps_n[i])?);
            }
            let traj = Dynamics::new(&ablation_kernel, &s.noise, &path, sim)?.simulate(&ablation_start)?;
            checksums.push(traj.noise_checksum.clone());
            let ablation = compare(&traj, plan.n_values[largest], plan.ablation_eps)?;
            let mut decoupled = Vec::new();
            if plan.decoupled_ablation {
                let other = cfg.noise.path(seed + DECOUPLED_SEED_SHIFT, &s.noise)?;
                let traj = Dynamics::new(&kernels[smallest], &s.noise, &other, sim)?.simulate(&starts[smallest])?;
                decoupled = compare(&traj, plan.n_values[smallest], eps_n[smallest])?;
            }
            Ok(SeedOut {
                rows,
                ablation,
                decoupled,
                checksums,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = RateReport::new(Experiment::Full.name(), cfg.hash());
    for (seed, o) in s.seeds.iter().zip(&outs) {
        report.rows.extend_from_slice(&o.rows);
        report.checksums.insert(*seed, o.checksums.clone());
    }
    let mut per_n = Vec::new();
    for (i, &n) in plan.n_values.iter().enumerate() {
        let cell: Vec<Row> = report.rows.iter().filter(|r| r.n == n).copied().collect();
        let mut g = group(format!("N={n}"), n, eps_n[i], per_seed_sup(&cell, &s.seeds));
        g.zeta = Some(zetas[i]);
        per_n.push(g.d1.clone());
        report.groups.push(g);
    }
    let stats: Vec<(f64, f64)> = report.groups.iter().map(|g| (g.mean, g.stderr)).collect();
    let inversions: Vec<usize> = (1..stats.len()).filter(|&i| stats[i].0 >= stats[i - 1].0).collect();
    let within = inversions
        .iter()
        .all(|&i| stats[i].0 - stats[i - 1].0 <= stats[i].1.max(stats[i - 1].1));
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    report.checks.push(Check::new(
        "mean_decreasing",
        inversions.len() <= 1 && within,
        format!(
            "mean d1 {means:.4?} over N = {:?} with eps {eps_n:.4?}; {} inversion(s)",
            plan.n_values,
            inversions.len()
        ),
    ));
    report
        .diagnostics
        .insert("strictly_decreasing".into(), if inversions.is_empty() { 1.0 } else { 0.0 });
    if plan.n_values.len() >= 2 {
        let lz: Vec<f64> = zetas.iter().map(|z| z.ln()).collect();
        let ld: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        report.slopes.insert("d1_vs_zeta".into(), ls_slope(&lz, &ld));
    }

    let abl_rows: Vec<Row> = outs.iter().flat_map(|o| o.ablation.clone()).collect();
    let n_large = plan.n_values[largest];
    let g = group(
        format!("fixed eps N={n_large}"),
        n_large,
        plan.ablation_eps,
        per_seed_sup(&abl_rows, &s.seeds),
    );
    let horizon = s.horizon;
    let terminal = |rows: &[Row], n: usize| -> Vec<f64> {
        s.seeds
            .iter()
            .map(|&seed| {
                rows.iter()
                    .find(|r| r.seed == seed && r.n == n && (r.t - horizon).abs() <= TIME_TOL)
                    .map_or(f64::NAN, |r| r.d1)
            })
            .collect()
    };
    let scheduled_end = terminal(&report.rows, n_large);
    let fixed_end = terminal(&abl_rows, n_large);
    let worse = fixed_end.iter().zip(&scheduled_end).filter(|(a, b)| a > b).count();
    let p = sign_test_p(worse, s.seeds.len());
    report.diagnostics.insert("ablation_sign_test_p".into(), p);
    report.checks.push(Check::new(
        "fixed_eps_ablation",
        p < 0.05,
        format!(
            "terminal d1 at eps = {} worse than at eps = {:.4} in {worse}/{} seeds at N = {n_large}, one-sided sign test p = {p:.4}",
            plan.ablation_eps,
            eps_n[largest],
            s.seeds.len()
        ),
    ));
    report.groups.push(g);
    report.checks.push(checksum_check(&report.checksums));
    if plan.decoupled_ablation {
        let rows: Vec<Row> = outs.iter().flat_map(|o| o.decoupled.clone()).collect();
        let n = plan.n_values[smallest];
        let g = group(format!("decoupled N={n}"), n, eps_n[smallest], per_seed_sup(&rows, &s.seeds));
        report.checks.push(decoupled_check(&per_n[smallest], &g.d1));
        report.groups.push(g);
    }
    Ok(report)
}
