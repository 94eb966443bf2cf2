use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site coordinate {coord:?} lies outside (-{half_side}, {half_side}]^{nu}")]
    SiteOutOfRange { coord: Vec<i64>, half_side: i64, nu: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular zero mode: gamma(k=0) = 0 when omega = 0 ({context})")]
    SingularMode { context: &'static str },

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate interaction graph: {0}")]
    DegenerateGraph(String),

    #[error("integral did not converge (partial value {partial}, last shell contribution {tail})")]
    Divergence { partial: f64, tail: f64 },

    #[error("Fock space dimension {dim} exceeds the dense limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("truncation not converged: change {change:.3e} between n={n} and n={n_next} exceeds {tolerance:.1e}")]
    Unconverged {
        n: usize,
        n_next: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
