use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters, schemas or configuration.
    Config,
    /// A numerical method failed (no convergence, step underflow, ...).
    Numerical,
    /// Filesystem or stream failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operator is not Hermitian: entry ({i},{j}) deviates by {deviation:e}")]
    NotHermitian { i: usize, j: usize, deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("link coupling between sites {site} and {next} vanishes; theta is undefined")]
    ZeroLink { site: usize, next: usize },

    #[error("entry ({i},{j}) breaks the nearest-neighbour ring pattern")]
    NonRingSparsity { i: usize, j: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("eigendecomposition failed at theta = {theta}: {source}")]
    SweepPoint {
        theta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("schedule does not cover the requested time range: {0}")]
    ScheduleGap(String),

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps at t = {t} (last error estimate {achieved:e})")]
    ToleranceFailure { t: f64, max_steps: usize, achieved: f64 },

    #[error("result not converged in domain length: |r(L) - r(L-2)| = {difference:e}")]
    DomainNotConverged { difference: f64 },

    #[error("epsilon extrapolation is non-monotone; raw grid {raw:?}")]
    NonMonotoneExtrapolation { raw: Vec<(f64, f64)> },

    #[error("shift epsilon = {epsilon} is too large for the zero mode to stay isolated")]
    ShiftTooLarge { epsilon: f64 },

    #[error("level graph: {0}")]
    Schema(String),

    #[error("no drive for ring edge {a} -- {b}")]
    MissingDrive { a: String, b: String },

    #[error("ambiguous rotating frame: detunings around the ring fail to close by {residual:e} ns^-1")]
    AmbiguousFrame { residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParams(_)
            | Error::NotHermitian { .. }
            | Error::DimensionMismatch { .. }
            | Error::ZeroLink { .. }
            | Error::NonRingSparsity { .. }
            | Error::InvalidState(_)
            | Error::ScheduleGap(_)
            | Error::Schema(_)
            | Error::MissingDrive { .. }
            | Error::AmbiguousFrame { .. }
            | Error::ShiftTooLarge { .. }
            | Error::Json(_) => ErrorClass::Config,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            Error::Csv(_) => ErrorClass::Config,
            Error::Io(_) => ErrorClass::Io,
            Error::SweepPoint { source, .. } => source.class(),
            Error::NoConvergence { .. }
            | Error::StepUnderflow { .. }
            | Error::ToleranceFailure { .. }
            | Error::DomainNotConverged { .. }
            | Error::NonMonotoneExtrapolation { .. }
            | Error::Fit(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
