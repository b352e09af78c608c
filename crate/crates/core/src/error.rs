use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of the operation (negative flow, NaN toll, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no preimage: target {target} is below the latency at zero flow ({floor})")]
    NoPreimage { target: f64, floor: f64 },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    /// The instance itself is malformed. `links` lists the offending links (0-based).
    #[error("invalid instance: {reason} (links {links:?})")]
    Structural { reason: String, links: Vec<usize> },

    #[error("infeasible flow: {0}")]
    InfeasibleFlow(String),

    #[error("link index {index} out of range for {n} links")]
    IndexOutOfRange { index: usize, n: usize },

    /// The requested method does not apply to this instance (non-affine latencies,
    /// missing full support, ...).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// An internal consistency check failed (residual above tolerance).
    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
