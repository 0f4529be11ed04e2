//! Convergence experiments: ε(N) schedule, common-noise coupled runs and reports.

pub mod experiments;
pub mod report;
pub mod schedule;
pub mod stats;

pub use experiments::{run, run_full, run_mollification, run_regularized, Experiment};
pub use report::{Check, Group, RateReport, Row};
pub use schedule::EpsSchedule;
