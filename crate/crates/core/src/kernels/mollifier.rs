//! The standard C∞ bump mollifier and its Fourier transform.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of trapezoid intervals on [-1, 1] for the outer (x1) integral.
const OUTER_INTERVALS: usize = 1024;
/// Number of trapezoid intervals for the inner integral of the projection.
const INNER_INTERVALS: usize = 512;

#[inline]
fn bump_raw(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Tabulated projection P(x1) = ∫ ρ(x1, x2) dx2 of the unit bump.
///
/// The bump is flat to all orders at the boundary, so plain trapezoid sums converge
/// faster than any power of the node count; the radial Fourier transform then reduces
/// to a one-dimensional cosine sum over the projection.
#[derive(Debug)]
pub struct BumpProfile {
    /// Nodes x1 in [0, 1).
    nodes: Vec<f64>,
    /// Quadrature weight times normalized projection, already folded over x1 -> -x1.
    weighted: Vec<f64>,
    /// ∫ exp(-1 / (1 - |x|^2)) over the unit disk.
    normalizer: f64,
}

impl BumpProfile {
    fn build() -> Self {
        let h = 2.0 / OUTER_INTERVALS as f64;
        let half = OUTER_INTERVALS / 2;
        let mut nodes = Vec::with_capacity(half);
        let mut raw = Vec::with_capacity(half);
        for j in 0..half {
            let x = j as f64 * h;
            nodes.push(x);
            raw.push(projection_raw(x));
        }
        let fold = |j: usize| if j == 0 { h } else { 2.0 * h };
        let normalizer: f64 = raw.iter().enumerate().map(|(j, p)| fold(j) * p).sum();
        let weighted = raw
            .iter()
            .enumerate()
            .map(|(j, p)| fold(j) * p / normalizer)
            .collect();
        BumpProfile {
            nodes,
            weighted,
            normalizer,
        }
    }

    /// Shared process-wide instance.
    pub fn get() -> &'static BumpProfile {
        static PROFILE: OnceLock<BumpProfile> = OnceLock::new();
        PROFILE.get_or_init(BumpProfile::build)
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Unit-mass density ρ(x) at squared radius r2.
    #[inline]
    pub fn density_r2(&self, r2: f64) -> f64 {
        bump_raw(r2) / self.normalizer
    }

    /// First moment ∫ |x| ρ(x) dx.
    pub fn first_moment(&self) -> f64 {
        // trapezoid in r; the integrand is flat to all orders at r = 1
        let m = 4096;
        let h = 1.0 / m as f64;
        let acc: f64 = (1..m)
            .map(|j| {
                let r = j as f64 * h;
                r * r * self.density_r2(r * r)
            })
            .sum();
        2.0 * PI * h * acc
    }

    /// Fourier transform ρ̂(s) = ∫ ρ(x) e^{-i s·x} dx at radial frequency |s| = s.
    pub fn transform(&self, s: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weighted)
            .map(|(x, w)| w * (s * x).cos())
            .sum()
    }
}

fn projection_raw(x1: f64) -> f64 {
    let a2 = 1.0 - x1 * x1;
    if a2 <= 0.0 {
        return 0.0;
    }
    let a = a2.sqrt();
    // substitute x2 = a t, so 1 - x1^2 - x2^2 = a^2 (1 - t^2)
    let h = 2.0 / INNER_INTERVALS as f64;
    let mut acc = 0.0;
    for j in 1..INNER_INTERVALS {
        let t = -1.0 + j as f64 * h;
        let q = a2 * (1.0 - t * t);
        acc += (-1.0 / q).exp();
    }
    a * h * acc
}

/// ρ^ε(x) = ε^{-2} ρ(x / ε).
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    eps: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Self {
        Mollifier { eps }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Density at a planar displacement (not periodized; the support must fit in the domain).
    pub fn density(&self, d: [f64; 2]) -> f64 {
        let r2 = (d[0] * d[0] + d[1] * d[1]) / (self.eps * self.eps);
        BumpProfile::get().density_r2(r2) / (self.eps * self.eps)
    }

    /// Fourier multiplier ρ̂(ε |k|).
    pub fn transform(&self, k_norm: f64) -> f64 {
        BumpProfile::get().transform(self.eps * k_norm)
    }

    /// Multipliers for every lattice vector with |k|∞ <= kmax, stored at
    /// `(k1 + kmax) * (2 kmax + 1) + (k2 + kmax)`. Values are shared between vectors of
    /// equal length.
    pub fn lattice_multipliers(&self, kmax: usize) -> Vec<f64> {
        let side = 2 * kmax + 1;
        let km = kmax as i64;
        let mut cache: HashMap<i64, f64> = HashMap::new();
        let mut out = vec![0.0; side * side];
        for k1 in -km..=km {
            for k2 in -km..=km {
                let r2 = k1 * k1 + k2 * k2;
                let v = *cache
                    .entry(r2)
                    .or_insert_with(|| self.transform((r2 as f64).sqrt()));
                out[((k1 + km) as usize) * side + (k2 + km) as usize] = v;
            }
        }
        out
    }
}

/// Radius below which ρ^ε vanishes identically.
pub fn support_radius(eps: f64) -> f64 {
    eps
}
