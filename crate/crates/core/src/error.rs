use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),

    #[error("kernel evaluated at singular displacement |x| = {0:e}")]
    Singular(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: n = {n}, need n >= {required} for eps = {eps}")]
    GridTooCoarse { n: usize, required: usize, eps: f64 },

    #[error("CFL violation at t = {t}: dt = {dt:e} exceeds stable bound {bound:e}; retry with dt <= {suggested:e}")]
    Cfl {
        t: f64,
        dt: f64,
        bound: f64,
        suggested: f64,
    },

    #[error("initial vorticity has nonzero mean {0:e}")]
    NonZeroMean(f64),

    #[error("state became non-finite at step {step} (t = {t}): {detail}")]
    Diverged { step: u64, t: f64, detail: String },

    #[error("LP has {atoms} atoms, above the exact-solver limit {limit}; use w1_dual_ascent")]
    TooManyAtoms { atoms: usize, limit: usize },

    #[error("time grids of the two measure paths do not match")]
    TimeGridMismatch,

    #[error("schedule undefined for zeta = {0} (requires 0 < zeta < 1)")]
    ScheduleDomain(f64),

    #[error("vorticity is identically zero; no sampling density")]
    EmptyDensity,

    #[error("total variation {tv} exceeds bound {bound}")]
    MassBound { tv: f64, bound: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("common-noise invariant violated: {0}")]
    CommonNoise(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
