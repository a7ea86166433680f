use thiserror::Error;

/// Errors raised across graph construction, spectral and dynamical computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry produces unintended connectivity: {0}")]
    UnintendedEdges(String),

    #[error("{what}: {count} exceeds cap {cap}")]
    ResourceLimit { what: String, count: u128, cap: u128 },

    #[error("unrecognized gadget structure: {0}")]
    UnrecognizedStructure(String),

    #[error("operators live on different configuration spaces")]
    SpaceMismatch,

    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:.3e})")]
    NoConvergence { restarts: usize, residual: f64 },

    #[error("no interior minimum in [{lo}, {hi}]: minimum sits at {at}")]
    NoInteriorMinimum { lo: f64, hi: f64, at: f64 },

    #[error("no crossing found in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("matrix is reducible: {0}")]
    Reducible(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("window [{0}, {1}] contains no samples")]
    EmptyWindow(f64, f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::UnintendedEdges(_) => "unintended_edges",
            Error::ResourceLimit { .. } => "resource_limit",
            Error::UnrecognizedStructure(_) => "unrecognized_structure",
            Error::SpaceMismatch => "space_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NoInteriorMinimum { .. } => "no_interior_minimum",
            Error::NoCrossing { .. } => "no_crossing",
            Error::Reducible(_) => "reducible",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Integration(_) => "integration",
            Error::EmptyWindow(..) => "empty_window",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
