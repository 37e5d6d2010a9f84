use thiserror::Error;

/// Errors produced anywhere in the offline/online pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh resolution {nx}x{ny}: both counts must be at least 2")]
    MeshTooCoarse { nx: usize, ny: usize },

    #[error("nx = {0} is odd; the interface line x1 = 0.5 must coincide with mesh edges")]
    InterfaceMisaligned(usize),

    #[error("coefficient refers to parameter component {index}, but the parameter box has {dim} components")]
    UnknownCoefficient { index: usize, dim: usize },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("singular system at {context}: pivot ratio estimate {condition:.3e}")]
    Singular { context: String, condition: f64 },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.1e} at {context}")]
    InaccurateSolve {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("node-finding iteration did not converge for {0} Lobatto points")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
