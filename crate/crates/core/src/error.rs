use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sobolev order {0} exceeds the supported maximum of 4")]
    SobolevOrder(usize),

    #[error("stability violation at t={t}: dt={dt} exceeds the CFL limit {limit}")]
    Stability { t: f64, dt: f64, limit: f64 },

    #[error("non-finite value produced at t={0}")]
    NonFinite(f64),

    #[error("positivity floor violated at t={t}, x={x}: value {value} is below floor {floor} (margin {margin})")]
    PositivityFloor {
        t: f64,
        x: f64,
        value: f64,
        floor: f64,
        margin: f64,
    },

    #[error("density lower bound violated: min {min} at x={x} is not positive")]
    NonPositiveDensity { min: f64, x: f64 },

    #[error("mollified denominator {value} fell below the floor {floor}")]
    DenominatorFloor { value: f64, floor: f64 },

    #[error("increment count mismatch: expected {expected}, got {got}")]
    IncrementMismatch { expected: usize, got: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("domain mismatch: [0, {left}] vs [0, {right}]")]
    DomainMismatch { left: f64, right: f64 },

    #[error("sample count mismatch: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("too many samples for exact assignment: {n} > {max}")]
    TooManySamples { n: usize, max: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
