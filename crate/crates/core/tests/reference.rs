mod common;

use common::SplitMix;
use vortexlab::dynamics::Integrator;
use vortexlab::field::{velocity_from_vorticity, VorticityField};
use vortexlab::metrics::{pushforward, w1_bl, SignedAtomicMeasure};
use vortexlab::noise::{BrownianPath, NoiseModel};
use vortexlab::reference::{NoiseStep, ReferenceConfig, ReferenceSolver};
use vortexlab::sampling::{InitialVorticity, Preset};
use vortexlab::torus::{TorusGrid, TorusPoint};
use vortexlab::Error;

const DT_FINE: f64 = 2.5e-4;

fn noise() -> NoiseModel {
    NoiseModel::perpendicular(4, 5.0).unwrap()
}

fn config(n: usize, dt: f64, t_end: f64) -> ReferenceConfig {
    ReferenceConfig {
        n,
        dt,
        t_end,
        save_every: usize::MAX,
        noise_step: NoiseStep::default(),
    }
}

#[test]
fn velocity_matches_analytic_modes() {
    // ξ = Σ c sin(k·x) has u = Σ c (k2, -k1) cos(k·x) / |k|^2
    let modes = [((1i64, 0i64), 1.0), ((2, -1), 0.5), ((0, 3), -0.25), ((3, 2), 0.125)];
    let xi = |x: (f64, f64)| -> f64 {
        modes
            .iter()
            .map(|((a, b), c)| c * (*a as f64 * x.0 + *b as f64 * x.1).sin())
            .sum()
    };
    let f = VorticityField::from_fn(32, |p| xi((p.x1(), p.x2()))).unwrap();
    let u = velocity_from_vorticity(&f);
    let g = TorusGrid::new(32).unwrap();
    for (idx, p) in g.nodes().enumerate() {
        let mut e = (0.0, 0.0);
        for ((a, b), c) in modes {
            let (a, b) = (a as f64, b as f64);
            let cs = (a * p.x1() + b * p.x2()).cos();
            e.0 += c * b * cs / (a * a + b * b);
            e.1 -= c * a * cs / (a * a + b * b);
        }
        assert!((u.u1[idx] - e.0).abs() < 1e-12 && (u.u2[idx] - e.1).abs() < 1e-12);
    }
    let zero = VorticityField::from_fn(16, |_| 0.0).unwrap();
    let u0 = velocity_from_vorticity(&zero);
    assert!(u0.u1.iter().chain(&u0.u2).all(|v| *v == 0.0));
}

#[test]
fn zero_state_is_stationary() {
    let none = NoiseModel::none();
    let path = BrownianPath::new(1, DT_FINE, 0).unwrap();
    let solver = ReferenceSolver::new(&none, &path, config(16, 1e-2, 0.5)).unwrap();
    let zero = VorticityField::from_fn(16, |_| 0.0).unwrap();
    let run = solver.solve(&zero).unwrap();
    assert!(run.final_field().values().iter().all(|v| *v == 0.0));
    let tracers: Vec<TorusPoint> = TorusGrid::new(4).unwrap().nodes().collect();
    let (_, tr) = solver
        .solve_with_tracers(&zero, &tracers, Integrator::HeunStratonovich)
        .unwrap();
    assert_eq!(tr.positions.last().unwrap(), &tracers);
}

#[test]
fn zero_horizon_returns_initial_field() {
    let nm = noise();
    let path = BrownianPath::new(1, DT_FINE, nm.len()).unwrap();
    let solver = ReferenceSolver::new(&nm, &path, config(32, 1e-3, 0.0)).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(32).unwrap();
    let run = solver.solve(&init).unwrap();
    assert_eq!(run.snapshots.len(), 1);
    for (a, b) in run.final_field().values().iter().zip(init.values()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn enstrophy_conserved_without_noise() {
    let none = NoiseModel::none();
    let path = BrownianPath::new(1, DT_FINE, 0).unwrap();
    let mut cfg = config(128, 1e-3, 1.0);
    cfg.save_every = 100;
    let solver = ReferenceSolver::new(&none, &path, cfg).unwrap();
    let init = InitialVorticity::preset(Preset::Patches, 4.0).to_field(128).unwrap();
    let run = solver.solve(&init).unwrap();
    let e0 = run.snapshots[0].enstrophy();
    let mut prev = e0;
    for s in &run.snapshots {
        let e = s.enstrophy();
        assert!(e <= prev * (1.0 + 1e-12), "enstrophy grew: {prev} -> {e}");
        prev = e;
    }
    let drift = (prev - e0).abs() / e0;
    assert!(drift < 5e-3, "relative enstrophy change {drift}");
    // the patches actually moved
    let moved: f64 = run.snapshots[0]
        .values()
        .iter()
        .zip(run.final_field().values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved > 0.1);
}

#[test]
fn mean_and_sup_norm_with_noise() {
    let nm = noise();
    let path = BrownianPath::new(7, DT_FINE, nm.len()).unwrap();
    let mut cfg = config(64, 1e-3, 1.0);
    cfg.save_every = 50;
    let solver = ReferenceSolver::new(&nm, &path, cfg).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(64).unwrap();
    let run = solver.solve(&init).unwrap();
    let sup0 = init.sup_norm();
    for s in &run.snapshots {
        assert!(s.integral().abs() < 1e-12, "mean {}", s.integral());
        assert!(s.sup_norm() <= sup0 * 1.05, "sup {} at t = {}", s.sup_norm(), s.time());
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let nm = noise();
    let path = BrownianPath::new(3, DT_FINE, nm.len()).unwrap();
    let solver = ReferenceSolver::new(&nm, &path, config(32, 2e-3, 0.2)).unwrap();
    let init = InitialVorticity::preset(Preset::Patches, 2.0).to_field(32).unwrap();
    let a = solver.solve(&init).unwrap();
    let b = solver.solve(&init).unwrap();
    assert_eq!(a.final_field(), b.final_field());
    assert_eq!(a.noise_checksum, b.noise_checksum);
}

#[test]
fn cfl_and_mean_errors() {
    let nm = noise();
    let path = BrownianPath::new(3, DT_FINE, nm.len()).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(64).unwrap();
    let solver = ReferenceSolver::new(&nm, &path, config(64, 0.1, 0.2)).unwrap();
    match solver.solve(&init) {
        Err(Error::Cfl { dt, bound, suggested, .. }) => {
            assert!(dt > bound && suggested <= bound);
        }
        other => panic!("expected CFL error, got {other:?}"),
    }
    let shifted = VorticityField::from_fn(64, |p| 1.0 + p.x1().sin()).unwrap();
    let solver = ReferenceSolver::new(&nm, &path, config(64, 1e-3, 0.01)).unwrap();
    assert!(matches!(solver.solve(&shifted), Err(Error::NonZeroMean(_))));
}

#[test]
fn refinement_differences_shrink() {
    let nm = noise();
    let path = BrownianPath::new(5, DT_FINE, nm.len()).unwrap();
    let init = InitialVorticity::preset(Preset::Patches, 2.0);
    let mut finals = Vec::new();
    for n in [32usize, 64, 128] {
        let solver = ReferenceSolver::new(&nm, &path, config(n, 1e-3, 0.5)).unwrap();
        finals.push(solver.solve(&init.to_field(n).unwrap()).unwrap().final_field().resample(128).unwrap());
    }
    let l1 = |a: &VorticityField, b: &VorticityField| {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * a.grid().cell_area()
    };
    let d1 = l1(&finals[0], &finals[1]);
    let d2 = l1(&finals[1], &finals[2]);
    assert!(d2 < d1, "{d1} then {d2}");
}

#[test]
fn vorticity_is_constant_along_tracers() {
    let nm = noise();
    let path = BrownianPath::new(11, DT_FINE, nm.len()).unwrap();
    let n = 128;
    let solver = ReferenceSolver::new(&nm, &path, config(n, 1e-3, 0.5)).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(n).unwrap();
    let mut rng = SplitMix(2);
    let tracers: Vec<TorusPoint> = (0..64)
        .map(|_| TorusPoint::wrap(rng.range(0.0, 6.28), rng.range(0.0, 6.28)).unwrap())
        .collect();
    let (run, tr) = solver
        .solve_with_tracers(&init, &tracers, Integrator::HeunStratonovich)
        .unwrap();
    let fin = run.final_field();
    for (x0, xt) in tracers.iter().zip(tr.positions.last().unwrap()) {
        let a = init.interpolate(*x0);
        let b = fin.interpolate(*xt);
        assert!((a - b).abs() < 2e-2, "{a} vs {b}");
    }
}

#[test]
fn tracer_jacobian_is_unimodular() {
    let nm = noise();
    let path = BrownianPath::new(13, DT_FINE, nm.len()).unwrap();
    let n = 64;
    let solver = ReferenceSolver::new(&nm, &path, config(n, 1e-3, 1.0)).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(n).unwrap();
    let delta = 1e-4;
    let base: Vec<TorusPoint> = TorusGrid::new(6).unwrap().nodes().map(|p| p.translate([0.1, 0.2])).collect();
    let mut tracers = Vec::new();
    for p in &base {
        tracers.push(*p);
        tracers.push(p.translate([delta, 0.0]));
        tracers.push(p.translate([0.0, delta]));
    }
    let (_, tr) = solver
        .solve_with_tracers(&init, &tracers, Integrator::HeunStratonovich)
        .unwrap();
    let end = tr.positions.last().unwrap();
    for c in end.chunks(3) {
        let d = |a: TorusPoint, b: TorusPoint| {
            let r = |x: f64| x - std::f64::consts::TAU * (x / std::f64::consts::TAU).round();
            [r(b.x1() - a.x1()) / delta, r(b.x2() - a.x2()) / delta]
        };
        let j1 = d(c[0], c[1]);
        let j2 = d(c[0], c[2]);
        let det = j1[0] * j2[1] - j1[1] * j2[0];
        assert!((det - 1.0).abs() < 5e-3, "det = {det}");
    }
}

/// W1 between the transported initial quadrature atoms and the solver's own atoms.
fn duality_gap(n: usize, dt: f64, t_end: f64, nm: &NoiseModel, path: &BrownianPath) -> f64 {
    let solver = ReferenceSolver::new(nm, path, config(n, dt, t_end)).unwrap();
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(n).unwrap();
    let nodes: Vec<TorusPoint> = init.grid().nodes().collect();
    let (run, tr) = solver
        .solve_with_tracers(&init, &nodes, Integrator::HeunStratonovich)
        .unwrap();
    let end = tr.positions.last().unwrap().clone();
    let mu0 = init.to_measure();
    let pushed = pushforward(&mu0, |p| {
        let g = init.grid();
        let h = g.spacing();
        let i = (p.x1() / h).round() as usize % n;
        let j = (p.x2() / h).round() as usize % n;
        end[g.index(i, j)]
    });
    w1_bl(&pushed, &run.final_field().to_measure()).unwrap()
}

#[test]
fn pushforward_matches_solution_under_refinement() {
    let nm = noise();
    let path = BrownianPath::new(17, DT_FINE, nm.len()).unwrap();
    let gaps: Vec<f64> = [(16usize, 1e-2), (32, 5e-3), (64, 2.5e-3)]
        .iter()
        .map(|&(n, dt)| duality_gap(n, dt, 0.5, &nm, &path))
        .collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn field_atoms_carry_quadrature_weights() {
    let f = InitialVorticity::preset(Preset::Shear, 1.0).to_field(8).unwrap();
    let m: SignedAtomicMeasure = f.to_measure();
    let h2 = f.grid().cell_area();
    for (p, w) in m.atoms() {
        assert!((w - p.x2().sin() * h2).abs() < 1e-14);
    }
}

#[test]
fn ito_euler_mean_is_conserved() {
    let nm = noise();
    let path = BrownianPath::new(19, DT_FINE, nm.len()).unwrap();
    let mut cfg = config(32, 1e-3, 0.5);
    cfg.noise_step = NoiseStep::ItoEuler;
    cfg.save_every = 50;
    let solver = ReferenceSolver::new(&nm, &path, cfg).unwrap();
    let init = InitialVorticity::preset(Preset::Patches, 2.0).to_field(32).unwrap();
    for s in solver.solve(&init).unwrap().snapshots {
        assert!(s.integral().abs() < 1e-12);
    }
}

#[test]
fn ito_euler_approaches_exponential_step() {
    let nm = noise();
    let fine = 6.25e-5;
    let path = BrownianPath::new(23, fine, nm.len()).unwrap();
    let n = 32;
    let init = InitialVorticity::preset(Preset::TaylorGreen, 1.0).to_field(n).unwrap();
    let reference = ReferenceSolver::new(&nm, &path, config(n, fine, 0.25))
        .unwrap()
        .solve(&init)
        .unwrap();
    let errs: Vec<f64> = [1e-3, 2.5e-4, 6.25e-5]
        .iter()
        .map(|&dt| {
            let mut cfg = config(n, dt, 0.25);
            cfg.noise_step = NoiseStep::ItoEuler;
            let run = ReferenceSolver::new(&nm, &path, cfg).unwrap().solve(&init).unwrap();
            run.final_field()
                .values()
                .iter()
                .zip(reference.final_field().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}
