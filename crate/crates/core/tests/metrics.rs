mod common;

use common::{bl_lp_oracle, matching_oracle, torus_distance, SplitMix};
use proptest::prelude::*;
use vortexlab::metrics::{
    path_distance_dp, pushforward, two_point_w1, w1_bl, w1_dual_ascent, w1_solve, MeasurePath,
    MetricMode, SignedAtomicMeasure,
};
use vortexlab::torus::{TorusPoint, DIAMETER};

fn pt(a: f64, b: f64) -> TorusPoint {
    TorusPoint::wrap(a, b).unwrap()
}

fn random_measure(rng: &mut SplitMix, atoms: usize, spread: f64) -> SignedAtomicMeasure {
    SignedAtomicMeasure::new((0..atoms).map(|_| {
        (
            pt(rng.range(0.0, spread), rng.range(0.0, spread)),
            rng.range(-1.0, 1.0),
        )
    }))
}

fn oracle(mu: &SignedAtomicMeasure, nu: &SignedAtomicMeasure) -> f64 {
    let d = mu.difference(nu);
    let atoms: Vec<_> = d
        .atoms()
        .map(|(p, w)| ((p.x1(), p.x2()), w))
        .collect();
    if atoms.is_empty() {
        0.0
    } else {
        bl_lp_oracle(&atoms)
    }
}

#[test]
fn two_point_closed_form_matches_lp() {
    for &d in &[0.5, 1.0, DIAMETER] {
        let x = pt(0.0, 0.0);
        let y = if d == DIAMETER {
            pt(std::f64::consts::PI, std::f64::consts::PI)
        } else {
            pt(d, 0.0)
        };
        let mu = SignedAtomicMeasure::dirac(x, 1.0);
        let nu = SignedAtomicMeasure::dirac(y, 1.0);
        let w = w1_bl(&mu, &nu).unwrap();
        assert!((w - two_point_w1(d)).abs() < 1e-9);
        assert!((w - oracle(&mu, &nu)).abs() < 1e-9);
    }
    assert!((two_point_w1(1.0) - 2.0 / 3.0).abs() < 1e-15);
    // 2π√2 / (2 + π√2) = 1.379159...
    assert!((two_point_w1(DIAMETER) - 1.379159).abs() < 1e-6);
}

#[test]
fn matches_dense_lp_on_random_instances() {
    let mut rng = SplitMix(11);
    for case in 0..300 {
        let spread = if case % 3 == 0 { 1.0 } else { std::f64::consts::TAU };
        let mu = random_measure(&mut rng, 1 + case % 4, spread);
        let nu = random_measure(&mut rng, 1 + (case / 4) % 4, spread);
        let w = w1_bl(&mu, &nu).unwrap();
        let o = oracle(&mu, &nu);
        assert!((w - o).abs() < 1e-9, "case {case}: {w} vs {o}");
    }
}

#[test]
fn matches_dense_lp_on_grid_like_instances() {
    // many equal distances and balanced masses stress degenerate pivots
    let mut rng = SplitMix(5);
    for case in 0..40 {
        let h = std::f64::consts::TAU / 4.0;
        let mut atoms = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let w = (rng.next_u64() % 5) as f64 - 2.0;
                atoms.push((pt(i as f64 * h, j as f64 * h), w / 4.0));
            }
        }
        let mu = SignedAtomicMeasure::new(atoms);
        let nu = SignedAtomicMeasure::new([(pt(h * 0.5, h * 0.5), 0.25 * (case % 3) as f64)]);
        let w = w1_bl(&mu, &nu).unwrap();
        let o = oracle(&mu, &nu);
        assert!((w - o).abs() < 1e-9, "case {case}: {w} vs {o}");
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = SplitMix(99);
    for _ in 0..200 {
        let na = 1 + (rng.next_u64() % 6) as usize;
        let a = random_measure(&mut rng, na, 3.0);
        let nb = 1 + (rng.next_u64() % 6) as usize;
        let b = random_measure(&mut rng, nb, 3.0);
        let nc = 1 + (rng.next_u64() % 6) as usize;
        let c = random_measure(&mut rng, nc, 3.0);
        let ab = w1_bl(&a, &b).unwrap();
        let ba = w1_bl(&b, &a).unwrap();
        let bc = w1_bl(&b, &c).unwrap();
        let ac = w1_bl(&a, &c).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ac <= ab + bc + 1e-9);
        assert!(ab >= 0.0);
        assert!(w1_bl(&a, &a).unwrap() == 0.0);
        let tv = a.difference(&b).tv_norm();
        assert!(ab <= tv + 1e-9);
        assert!(ab >= (a.total_mass() - b.total_mass()).abs() - 1e-9);
    }
}

#[test]
fn kantorovich_mode_matches_matching_oracle() {
    let mut rng = SplitMix(3);
    for k in 1..=7usize {
        for _ in 0..6 {
            let center = (rng.range(0.0, 6.0), rng.range(0.0, 6.0));
            let r = 0.6;
            let cloud = |rng: &mut SplitMix| -> Vec<(f64, f64)> {
                (0..k)
                    .map(|_| {
                        let a = rng.range(0.0, std::f64::consts::TAU);
                        let rr = r * rng.uniform().sqrt();
                        (center.0 + rr * a.cos(), center.1 + rr * a.sin())
                    })
                    .collect()
            };
            let x = cloud(&mut rng);
            let y = cloud(&mut rng);
            let w = 1.0 / k as f64;
            let mu = SignedAtomicMeasure::new(x.iter().map(|p| (pt(p.0, p.1), w)));
            let nu = SignedAtomicMeasure::new(y.iter().map(|p| (pt(p.0, p.1), w)));
            let kant = w1_solve(&mu, &nu, MetricMode::LipDiag).unwrap().value;
            let o = matching_oracle(&x, &y);
            assert!((kant - o).abs() < 1e-9, "k={k}: {kant} vs {o}");
            // K / (1 + r) <= BL <= K for supports inside a ball of radius r
            let bl = w1_bl(&mu, &nu).unwrap();
            assert!(bl <= kant + 1e-9);
            assert!(bl >= kant / (1.0 + r) - 1e-9);
        }
    }
}

#[test]
fn dual_ascent_brackets_exact_value() {
    let mut rng = SplitMix(17);
    for case in 0..50 {
        let mu = random_measure(&mut rng, 5 + case % 20, 6.0);
        let nu = random_measure(&mut rng, 5 + (case * 7) % 20, 6.0);
        let exact = w1_bl(&mu, &nu).unwrap();
        let b = w1_dual_ascent(&mu, &nu, 1e-6).unwrap();
        assert!(b.converged);
        assert!(b.lower <= exact + 1e-9 && exact <= b.upper + 1e-9, "{b:?} vs {exact}");
        assert!(b.upper - b.lower <= 1e-6);
    }
    let mu = random_measure(&mut rng, 10, 6.0);
    let b = w1_dual_ascent(&mu, &mu, 1e-6).unwrap();
    assert!(b.lower == 0.0 && b.upper <= 1e-6);
}

#[test]
fn too_many_atoms_is_an_error() {
    let mu = SignedAtomicMeasure::new((0..10_001).map(|i| {
        let a = i as f64 * 0.001;
        (pt(a, a * 0.37), 1.0)
    }));
    assert!(matches!(
        w1_bl(&mu, &SignedAtomicMeasure::default()),
        Err(vortexlab::Error::TooManyAtoms { .. })
    ));
}

#[test]
fn larger_instances_agree_with_dual_bracket() {
    let mut rng = SplitMix(23);
    let mu = random_measure(&mut rng, 400, std::f64::consts::TAU);
    let nu = random_measure(&mut rng, 400, std::f64::consts::TAU);
    let exact = w1_solve(&mu, &nu, MetricMode::Bl).unwrap();
    // the returned potential certifies the value
    let v: f64 = exact
        .coefficients
        .iter()
        .zip(&exact.potential)
        .map(|(c, p)| c * p)
        .sum();
    assert!((v - exact.value).abs() < 1e-9);
    for (i, p) in exact.points.iter().enumerate() {
        assert!(exact.potential[i].abs() <= exact.s + 1e-9);
        for (j, q) in exact.points.iter().enumerate().skip(i + 1) {
            let d = torus_distance((p.x1(), p.x2()), (q.x1(), q.x2()));
            assert!((exact.potential[i] - exact.potential[j]).abs() <= exact.ell * d + 1e-9);
        }
    }
    let b = w1_dual_ascent(&mu, &nu, 1e-6).unwrap();
    assert!(b.lower <= exact.value + 1e-9 && exact.value <= b.upper + 1e-9);
}

#[test]
fn path_distance_examples() {
    let a = SignedAtomicMeasure::dirac(pt(0.0, 0.0), 1.0);
    let b = SignedAtomicMeasure::dirac(pt(1.0, 0.0), 1.0);
    let p1 = MeasurePath::new(vec![0.0, 1.0], vec![a.clone(), a.clone()]).unwrap();
    let p2 = MeasurePath::new(vec![0.0, 1.0], vec![b.clone(), a.clone()]).unwrap();
    assert_eq!(path_distance_dp(&[p1.clone()], &[p1.clone()], 2.0, 0.0).unwrap(), 0.0);
    let w = w1_bl(&a, &b).unwrap();
    let d = path_distance_dp(&[p1.clone()], &[p2.clone()], 1.0, 1e3).unwrap();
    assert!((d - w).abs() < 1e-12);
    let single = MeasurePath::new(vec![0.5], vec![a.clone()]).unwrap();
    let single_b = MeasurePath::new(vec![0.5], vec![b.clone()]).unwrap();
    assert!((path_distance_dp(&[single], &[single_b], 1.0, 0.0).unwrap() - w).abs() < 1e-12);
    let shifted = MeasurePath::new(vec![0.0, 1.5], vec![a.clone(), a]).unwrap();
    assert!(matches!(
        path_distance_dp(&[p1], &[shifted], 1.0, 0.0),
        Err(vortexlab::Error::TimeGridMismatch)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pushforward_bound(seed in 0u64..u64::MAX, atoms in 1usize..6, shift in 0.0f64..0.5) {
        let mut rng = SplitMix(seed);
        let mu = random_measure(&mut rng, atoms, std::f64::consts::TAU);
        let offsets: Vec<(f64, f64)> = (0..mu.len()).map(|_| (rng.range(-shift, shift), rng.range(-shift, shift))).collect();
        let f_img: Vec<TorusPoint> = mu.points().iter().map(|p| p.translate([0.3, -0.2])).collect();
        let g_img: Vec<TorusPoint> = f_img.iter().zip(&offsets).map(|(p, o)| p.translate([o.0, o.1])).collect();
        let lookup = |img: &Vec<TorusPoint>| {
            let src = mu.points().to_vec();
            let img = img.clone();
            move |p: TorusPoint| img[src.iter().position(|q| *q == p).unwrap()]
        };
        let fm = pushforward(&mu, lookup(&f_img));
        let gm = pushforward(&mu, lookup(&g_img));
        let sup = f_img.iter().zip(&g_img)
            .map(|(a, b)| torus_distance((a.x1(), a.x2()), (b.x1(), b.x2())))
            .fold(0.0, f64::max);
        let w = w1_bl(&fm, &gm).unwrap();
        prop_assert!(w <= mu.tv_norm() * sup + 1e-9);
        prop_assert!(fm.tv_norm() <= mu.tv_norm() + 1e-12);
    }
}
