//! Initial vorticity presets and their discretization into point-vortex ensembles.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VortexEnsemble;
use crate::error::{invalid, Error, Result};
use crate::field::VorticityField;
use crate::metrics::w1_bl;
use crate::torus::{min_image, TorusGrid, TorusPoint};

/// ChaCha stream reserved for initial sampling, disjoint from the Brownian streams.
const SAMPLING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// sin x2
    Shear,
    /// sin x1 sin x2
    TaylorGreen,
    /// Two smooth patches of opposite sign centred at (π/2, π) and (3π/2, π).
    Patches,
}

/// Radius of the patches preset.
const PATCH_RADIUS: f64 = 1.0;

fn bump(r: f64) -> f64 {
    let s = r / PATCH_RADIUS;
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl Preset {
    pub fn eval(&self, x: TorusPoint) -> f64 {
        match self {
            Preset::Shear => x.x2().sin(),
            Preset::TaylorGreen => x.x1().sin() * x.x2().sin(),
            Preset::Patches => {
                let a = TorusPoint::wrap_unchecked(0.5 * PI, PI);
                let b = TorusPoint::wrap_unchecked(1.5 * PI, PI);
                bump(min_image(x, a).norm()) - bump(min_image(x, b).norm())
            }
        }
    }
}

/// Initial condition ξ₀, either a scaled preset or a sampled field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialVorticity {
    Preset { preset: Preset, amplitude: f64 },
    Field(VorticityField),
}

impl InitialVorticity {
    pub fn preset(preset: Preset, amplitude: f64) -> Self {
        InitialVorticity::Preset { preset, amplitude }
    }

    /// Values on the n x n grid with the discrete mean removed.
    pub fn to_field(&self, n: usize) -> Result<VorticityField> {
        let mut f = match self {
            InitialVorticity::Preset { preset, amplitude } => {
                VorticityField::from_fn(n, |p| amplitude * preset.eval(p))?
            }
            InitialVorticity::Field(f) => f.resample(n)?,
        };
        f.remove_mean();
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    #[serde(rename = "iid_lemma", alias = "iid")]
    /// N i.i.d. positions with density |ξ₀| / ‖ξ₀‖_L1 and intensities sign(ξ₀) ‖ξ₀‖_L1.
    Iid,
    #[serde(rename = "grid_quadrature", alias = "grid")]
    /// One vortex per node of a √N x √N grid with intensity ξ₀(node) h^2 N.
    Grid,
}

/// I.i.d. sample from a grid field: a node is chosen with probability ∝ |ξ|, then the
/// position is uniform on the cell centred at that node.
pub fn sample_iid(field: &VorticityField, n: usize, seed: u64) -> Result<(Vec<TorusPoint>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("need at least one particle"));
    }
    let mass = field.l1_norm();
    if mass == 0.0 {
        return Err(Error::EmptyDensity);
    }
    let weights: Vec<f64> = field.values().iter().map(|v| v.abs()).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::EmptyDensity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLING_STREAM);
    let grid = field.grid();
    let h = grid.spacing();
    let side = grid.n();
    let mut pos = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    for _ in 0..n {
        let idx = dist.sample(&mut rng);
        let (i, j) = (idx / side, idx % side);
        let node = grid.node(i, j);
        let d1 = h * (rng.gen::<f64>() - 0.5);
        let d2 = h * (rng.gen::<f64>() - 0.5);
        pos.push(node.translate([d1, d2]));
        xi.push(field.values()[idx].signum() * mass);
    }
    Ok((pos, xi))
}

/// Deterministic grid sample with n_side^2 vortices.
pub fn sample_grid(field: &VorticityField) -> (Vec<TorusPoint>, Vec<f64>) {
    let grid: TorusGrid = field.grid();
    let scale = grid.cell_area() * grid.len() as f64;
    (grid.nodes().collect(), field.values().iter().map(|v| v * scale).collect())
}

/// ζ_N = W1(S₀^N, ξ₀) with ξ₀ represented by its node atoms on a `reference_n` grid.
pub fn measure_zeta(ensemble: &VortexEnsemble, init: &InitialVorticity, reference_n: usize) -> Result<f64> {
    let reference = init.to_field(reference_n)?.to_measure();
    w1_bl(&ensemble.empirical_measure(), &reference)
}

/// Build the initial ensemble. `n` is the particle count; in grid mode it must be a
/// perfect square. `density_n` is the grid on which the i.i.d. density is tabulated.
pub fn initial_ensemble(
    init: &InitialVorticity,
    mode: SamplingMode,
    n: usize,
    seed: u64,
    eps: f64,
    tv_bound: f64,
    density_n: usize,
) -> Result<VortexEnsemble> {
    let (pos, xi) = match mode {
        SamplingMode::Iid => sample_iid(&init.to_field(density_n)?, n, seed)?,
        SamplingMode::Grid => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(invalid(format!("grid sampling needs a square particle count, got {n}")));
            }
            sample_grid(&init.to_field(side)?)
        }
    };
    VortexEnsemble::new(pos, xi, eps, tv_bound)
}
