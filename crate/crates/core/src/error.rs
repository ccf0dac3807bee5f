use alloc::string::String;

/// Error categories raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("index {index} out of range for {len} sites")]
    Index { index: usize, len: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("measurement record mismatch: {0}")]
    Record(String),

    #[error("invalid integrator configuration: {0}")]
    Config(String),

    #[error("channel {channel} coupling is not Hermitian (relative anti-Hermitian part {deviation:e})")]
    NonHermitianChannel { channel: usize, deviation: f64 },

    #[error("channel {channel} is not a no-knowledge quadrature (theta = {theta})")]
    Angle { channel: usize, theta: f64 },

    #[error("operator is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("trajectory {stream_index}: {source}")]
    Trajectory {
        stream_index: u64,
        source: alloc::boxed::Box<Error>,
    },

    #[error("no homodyne quadrature gives a state-independent signal for this coupling")]
    NoQuadrature,
}

impl Error {
    /// Innermost error, looking through trajectory annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trajectory { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
