//! Point-vortex approximation of the stochastic 2D Euler equation on the torus.
//!
//! The crate provides the regularized Biot–Savart interaction, transport noise with a
//! shared Brownian path, the interacting particle system and its tracer flow, a
//! pseudo-spectral reference solver for the vorticity equation, exact bounded-Lipschitz
//! W1 distances between signed atomic measures, and the experiment harness that ties
//! them into convergence studies.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod field;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod noise;
pub mod reference;
pub mod sampling;
pub mod torus;

pub use error::{Error, Result};
