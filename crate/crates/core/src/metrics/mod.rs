//! Signed atomic measures and the bounded-Lipschitz W1 metric.

mod measure;
mod network_simplex;
mod path;
mod w1;

pub use measure::{pushforward, tv_norm, SignedAtomicMeasure, MERGE_TOL};
pub use path::{path_distance_dp, MeasurePath};
pub use w1::{
    two_point_w1, w1_bl, w1_dual_ascent, w1_solve, DualBracket, MetricMode, W1Solution,
    MAX_EXACT_ATOMS,
};
