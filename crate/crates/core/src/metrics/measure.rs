use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::torus::{TorusPoint, PERIOD};

/// Points closer than this (per coordinate, modulo the period) are treated as one atom.
pub const MERGE_TOL: f64 = 1e-12;

/// A finite signed measure Σ w_i δ_{p_i} with distinct atoms and nonzero weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedAtomicMeasure {
    points: Vec<TorusPoint>,
    weights: Vec<f64>,
    tv: f64,
}

impl SignedAtomicMeasure {
    /// Build from raw atoms, merging coincident points and dropping zero weights.
    pub fn new(atoms: impl IntoIterator<Item = (TorusPoint, f64)>) -> Self {
        let mut raw: Vec<(TorusPoint, f64)> = atoms
            .into_iter()
            .map(|(p, w)| (canonical(p), w))
            .collect();
        raw.sort_by(|a, b| cmp_points(&a.0, &b.0));
        let mut points: Vec<TorusPoint> = Vec::with_capacity(raw.len());
        let mut weights: Vec<f64> = Vec::with_capacity(raw.len());
        // sorted by x1, so candidates for merging lie in a short trailing window
        for (p, w) in raw {
            let mut merged = false;
            for k in (0..points.len()).rev() {
                let q = points[k];
                if p.x1() - q.x1() > MERGE_TOL {
                    break;
                }
                if (p.x2() - q.x2()).abs() <= MERGE_TOL {
                    weights[k] += w;
                    merged = true;
                    break;
                }
            }
            if !merged {
                points.push(p);
                weights.push(w);
            }
        }
        let (points, weights): (Vec<_>, Vec<_>) = points
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w != 0.0)
            .unzip();
        let tv = weights.iter().map(|w| w.abs()).sum();
        SignedAtomicMeasure {
            points,
            weights,
            tv,
        }
    }

    /// As [`new`](Self::new), rejecting measures whose total variation exceeds `bound`.
    pub fn with_bound(atoms: impl IntoIterator<Item = (TorusPoint, f64)>, bound: f64) -> Result<Self> {
        let m = Self::new(atoms);
        if m.tv > bound * (1.0 + 1e-12) {
            return Err(Error::MassBound { tv: m.tv, bound });
        }
        Ok(m)
    }

    pub fn dirac(p: TorusPoint, w: f64) -> Self {
        Self::new([(p, w)])
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (TorusPoint, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// ‖μ‖ = Σ |w_i|.
    pub fn tv_norm(&self) -> f64 {
        self.tv
    }

    /// μ(T^2) = Σ w_i.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// ∫ φ dμ.
    pub fn integrate(&self, phi: impl Fn(TorusPoint) -> f64) -> f64 {
        self.atoms().map(|(p, w)| w * phi(p)).sum()
    }

    /// μ - ν as a single merged measure.
    pub fn difference(&self, other: &SignedAtomicMeasure) -> SignedAtomicMeasure {
        Self::new(self.atoms().chain(other.atoms().map(|(p, w)| (p, -w))))
    }

    /// c μ.
    pub fn scaled(&self, c: f64) -> SignedAtomicMeasure {
        Self::new(self.atoms().map(|(p, w)| (p, c * w)))
    }
}

/// Total variation of a measure.
pub fn tv_norm(mu: &SignedAtomicMeasure) -> f64 {
    mu.tv_norm()
}

/// f_♯ μ: atoms moved by `map`, weights kept, coincident images merged.
pub fn pushforward(mu: &SignedAtomicMeasure, map: impl Fn(TorusPoint) -> TorusPoint) -> SignedAtomicMeasure {
    SignedAtomicMeasure::new(mu.atoms().map(|(p, w)| (map(p), w)))
}

fn canonical(p: TorusPoint) -> TorusPoint {
    // fold the seam so that points just below 2π merge with points at 0
    let f = |x: f64| if PERIOD - x <= MERGE_TOL { 0.0 } else { x };
    TorusPoint::wrap_unchecked(f(p.x1()), f(p.x2()))
}

fn cmp_points(a: &TorusPoint, b: &TorusPoint) -> Ordering {
    a.x1()
        .total_cmp(&b.x1())
        .then_with(|| a.x2().total_cmp(&b.x2()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: f64, b: f64) -> TorusPoint {
        TorusPoint::wrap(a, b).unwrap()
    }

    #[test]
    fn merge_and_tv() {
        let m = SignedAtomicMeasure::new([(pt(1.0, 2.0), 1.0), (pt(1.0, 2.0), -1.0)]);
        assert!(m.is_empty());
        assert_eq!(m.tv_norm(), 0.0);
        let m = SignedAtomicMeasure::new([(pt(1.0, 2.0), 1.0), (pt(3.0, 2.0), -1.0)]);
        assert_eq!(m.tv_norm(), 2.0);
        let m = SignedAtomicMeasure::new([(pt(0.0, 1.0), 1.0), (pt(PERIOD - 1e-13, 1.0 + 1e-13), 2.0)]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights()[0], 3.0);
    }

    #[test]
    fn pushforward_constant_map() {
        let m = SignedAtomicMeasure::new([(pt(1.0, 2.0), 1.5), (pt(3.0, 0.5), -0.25)]);
        let c = pushforward(&m, |_| pt(0.3, 0.3));
        assert_eq!(c.len(), 1);
        assert!((c.weights()[0] - 1.25).abs() < 1e-15);
        assert_eq!(pushforward(&m, |p| p), m);
    }

    #[test]
    fn bound_enforced() {
        assert!(SignedAtomicMeasure::with_bound([(pt(0.0, 0.0), 2.0)], 1.0).is_err());
    }
}
