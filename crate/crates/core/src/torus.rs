//! Geometry of the flat torus (R / 2πZ)^2.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Side length of the fundamental domain.
pub const PERIOD: f64 = TAU;
/// Half the side length; minimum-image components lie in [-HALF_PERIOD, HALF_PERIOD).
pub const HALF_PERIOD: f64 = PI;
/// Largest possible torus distance, attained at (π, π).
pub const DIAMETER: f64 = PI * std::f64::consts::SQRT_2;

/// Reduce a coordinate into [0, 2π).
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    let r = x.rem_euclid(PERIOD);
    // rem_euclid can round up to exactly PERIOD for tiny negative inputs
    if r >= PERIOD {
        0.0
    } else {
        r
    }
}

/// Reduce a coordinate difference into [-π, π), ties going to -π.
///
/// The reduction is exactly odd away from the tie: `reduce_diff(-d) == -reduce_diff(d)`.
#[inline]
pub fn reduce_diff(d: f64) -> f64 {
    let r = d - PERIOD * (d / PERIOD).round();
    if r >= HALF_PERIOD {
        r - PERIOD
    } else if r < -HALF_PERIOD {
        r + PERIOD
    } else {
        r
    }
}

/// A point of the torus, stored with both coordinates in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { x1: 0.0, x2: 0.0 };

    /// Wrap arbitrary finite coordinates onto the fundamental domain.
    pub fn wrap(x1: f64, x2: f64) -> Result<Self> {
        if !x1.is_finite() || !x2.is_finite() {
            return Err(Error::NonFinite(x1, x2));
        }
        Ok(Self::wrap_unchecked(x1, x2))
    }

    /// Wrap without the finiteness check. Callers must guarantee finite input.
    #[inline]
    pub fn wrap_unchecked(x1: f64, x2: f64) -> Self {
        TorusPoint {
            x1: wrap_coord(x1),
            x2: wrap_coord(x2),
        }
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }

    #[inline]
    pub fn coords(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// Translate by a displacement and wrap.
    #[inline]
    pub fn translate(&self, d: [f64; 2]) -> Self {
        Self::wrap_unchecked(self.x1 + d[0], self.x2 + d[1])
    }
}

/// A displacement with components in [-π, π).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TorusDisplacement {
    pub d1: f64,
    pub d2: f64,
}

impl TorusDisplacement {
    /// Reduce an arbitrary finite vector to its minimum image.
    pub fn reduce(d1: f64, d2: f64) -> Self {
        TorusDisplacement {
            d1: reduce_diff(d1),
            d2: reduce_diff(d2),
        }
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.d1.hypot(self.d2)
    }

    #[inline]
    pub fn as_array(&self) -> [f64; 2] {
        [self.d1, self.d2]
    }
}

/// Minimum-image displacement `p - q`.
#[inline]
pub fn min_image(p: TorusPoint, q: TorusPoint) -> TorusDisplacement {
    TorusDisplacement {
        d1: reduce_diff(p.x1 - q.x1),
        d2: reduce_diff(p.x2 - q.x2),
    }
}

/// Geodesic distance on the flat torus.
#[inline]
pub fn torus_dist(p: TorusPoint, q: TorusPoint) -> f64 {
    min_image(p, q).norm()
}

/// Uniform n x n grid of nodes x_{ij} = (i h, j h), h = 2π / n.
///
/// Node (i, j) is stored at flat index `i * n + j`, so x1 is the slow index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        Ok(TorusGrid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        PERIOD / self.n as f64
    }

    /// Area of one grid cell.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> TorusPoint {
        TorusPoint {
            x1: self.coord(i),
            x2: self.coord(j),
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Iterate over all nodes in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).map(move |j| self.node(i, j)))
    }
}
