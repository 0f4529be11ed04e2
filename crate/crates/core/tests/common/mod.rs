//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the solver paths it is used to check.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

/// Two-phase dense tableau simplex with Bland's rule for `min c·x, A x = b, x >= 0`.
pub fn dense_simplex_eq(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    // columns: x (n), artificials (m), rhs
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // phase one: minimize the sum of artificials
    for i in 0..m {
        for j in 0..width {
            if j < n || j == width - 1 {
                t[m][j] -= t[i][j];
            }
        }
    }
    run_tableau(&mut t, &mut basis, n + m);
    assert!(t[m][width - 1].abs() < 1e-9, "infeasible LP");
    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot_tableau(&mut t, &mut basis, i, j);
            }
        }
    }
    // phase two: artificials barred from entering
    for j in 0..width {
        t[m][j] = 0.0;
    }
    for j in 0..n {
        t[m][j] = c[j];
    }
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t[m][j] -= cb * t[i][j];
            }
        }
    }
    run_tableau(&mut t, &mut basis, n);
    -t[m][width - 1]
}

fn pivot_tableau(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row && r[col] != 0.0 {
            let f = r[col];
            for (x, y) in r.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
        }
    }
    basis[row] = col;
}

/// Minimize the objective row over the first `cols` columns.
fn run_tableau(t: &mut [Vec<f64>], basis: &mut [usize], cols: usize) {
    let m = t.len() - 1;
    let width = t[0].len();
    let eps = 1e-11;
    // Bland: smallest index with negative reduced cost
    while let Some(col) = (0..cols).find(|&j| t[m][j] < -eps) {
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > eps {
                let ratio = t[i][width - 1].max(0.0) / t[i][col];
                let better = match row {
                    None => true,
                    Some(r) => ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[r]),
                };
                if better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        pivot_tableau(t, basis, row.expect("unbounded LP"), col);
    }
}

pub fn torus_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let f = |d: f64| {
        let r = d.rem_euclid(TAU);
        r.min(TAU - r)
    };
    f(a.0 - b.0).hypot(f(a.1 - b.1))
}

/// BL W1 of μ - ν given as merged (point, coefficient) lists, from the dual LP: the
/// minimum over transport plans f (atom to atom) and ground exchanges g of
/// max(total ground mass, total transport cost).
pub fn bl_lp_oracle(atoms: &[((f64, f64), f64)]) -> f64 {
    let m = atoms.len();
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                pairs.push((i, j, torus_distance(atoms[i].0, atoms[j].0)));
            }
        }
    }
    // columns: g+ (m), g- (m), f (pairs), t, two slacks
    let nf = pairs.len();
    let (tc, s1, s2) = (2 * m + nf, 2 * m + nf + 1, 2 * m + nf + 2);
    let nv = s2 + 1;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; nv];
        row[i] = 1.0;
        row[m + i] = -1.0;
        for (k, &(u, v, _)) in pairs.iter().enumerate() {
            if u == i {
                row[2 * m + k] += 1.0;
            }
            if v == i {
                row[2 * m + k] -= 1.0;
            }
        }
        a.push(row);
        b.push(atoms[i].1);
    }
    let mut ground = vec![0.0; nv];
    ground[..2 * m].iter_mut().for_each(|v| *v = 1.0);
    ground[tc] = -1.0;
    ground[s1] = 1.0;
    a.push(ground);
    b.push(0.0);
    let mut cost = vec![0.0; nv];
    for (k, &(_, _, d)) in pairs.iter().enumerate() {
        cost[2 * m + k] = d;
    }
    cost[tc] = -1.0;
    cost[s2] = 1.0;
    a.push(cost);
    b.push(0.0);
    let mut c = vec![0.0; nv];
    c[tc] = 1.0;
    dense_simplex_eq(&a, &b, &c)
}

/// Kantorovich distance between equal-weight point clouds of the same size, by
/// enumerating all matchings.
pub fn matching_oracle(x: &[(f64, f64)], y: &[(f64, f64)]) -> f64 {
    assert_eq!(x.len(), y.len());
    let k = x.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..k).map(|i| torus_distance(x[i], y[p[i]])).sum();
        best = best.min(cost);
    });
    best / k as f64
}

fn permute(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, f);
        p.swap(start, i);
    }
}

/// Direct Σ_k σ_k(x) σ_k(y)^T for the perpendicular family, written from the formula.
pub fn covariance_direct(kmax: i64, beta: f64, x: (f64, f64), y: (f64, f64)) -> [[f64; 2]; 2] {
    let mut q = [[0.0; 2]; 2];
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let norm = ((k1 * k1 + k2 * k2) as f64).powf(beta / 2.0);
            let v = [-(k2 as f64) / norm, k1 as f64 / norm];
            let px = k1 as f64 * x.0 + k2 as f64 * x.1;
            let py = k1 as f64 * y.0 + k2 as f64 * y.1;
            let fx = px.cos() + px.sin();
            let fy = py.cos() + py.sin();
            for i in 0..2 {
                for j in 0..2 {
                    q[i][j] += fx * fy * v[i] * v[j];
                }
            }
        }
    }
    q
}

/// a = Σ over all modes |k|^{2-2β} / 2, summed by enumerating lattice points.
pub fn isotropic_constant(kmax: i64, beta: f64) -> f64 {
    let mut s = 0.0;
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            if k1 != 0 || k2 != 0 {
                s += ((k1 * k1 + k2 * k2) as f64).powf(1.0 - beta);
            }
        }
    }
    0.5 * s
}

/// Planar Biot–Savart kernel (-x2, x1) / (2π |x|^2).
pub fn planar_kernel(x: (f64, f64)) -> (f64, f64) {
    let r2 = x.0 * x.0 + x.1 * x.1;
    (-x.1 / (TAU * r2), x.0 / (TAU * r2))
}

/// Truncated periodic kernel summed in real form over k in a square, written
/// independently of the library's paired loop.
pub fn periodic_kernel_sum(kmax: i64, x: (f64, f64)) -> (f64, f64) {
    let mut a = (0.0, 0.0);
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let r2 = (k1 * k1 + k2 * k2) as f64;
            let s = (k1 as f64 * x.0 + k2 as f64 * x.1).sin();
            a.0 += -(k2 as f64) * s / r2;
            a.1 += k1 as f64 * s / r2;
        }
    }
    (a.0 / (4.0 * PI * PI), a.1 / (4.0 * PI * PI))
}

/// ∫ ρ over the unit disk in polar form by composite Simpson in r.
pub fn bump_mass(density: impl Fn(f64) -> f64) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let r = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * TAU * r * density(r);
    }
    s * h / 3.0
}

/// Least-squares slope of y against x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Small deterministic generator so oracles do not share the library's RNG plumbing.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }
}

/// Radial Fourier transform 2π ∫ r ρ(r) J0(s r) dr, with J0 from its angular integral.
pub fn radial_transform(density: impl Fn(f64) -> f64, s: f64) -> f64 {
    let j0 = |z: f64| {
        let m = 400;
        let h = PI / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * (z * (i as f64 * h).cos()).cos();
        }
        acc * h / PI
    };
    bump_mass(|r| density(r) * j0(s * r))
}
