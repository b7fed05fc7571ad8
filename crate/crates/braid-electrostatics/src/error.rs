use thiserror::Error;

/// Errors raised by the numerical layers and the run front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The two rods would overlap (R must exceed 2a).
    #[error("non-penetrating rods required: R = {r} must exceed 2a = {two_a}")]
    NonPenetrating { r: f64, two_a: f64 },

    /// Geometry that the kinematic formulas cannot represent.
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// A truncated series or iterative method failed to meet its tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Two evaluations of the same closed form disagree.
    #[error("identity violated: {0}")]
    Identity(String),

    /// An integration step produced constraint drift above tolerance.
    #[error("step size too large: {0}")]
    StepSize(String),

    /// Malformed or invalid run configuration.
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// Filesystem failure while persisting a run.
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
