use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Analytic verdicts (an LMI that is not feasible, a certificate that fails
/// verification, a trajectory that leaves the feasible region) are returned
/// as values, not through this type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("symmetric eigensolver did not converge for a {dim}x{dim} matrix (off-diagonal residual {off_residual:e})")]
    EigNoConvergence { dim: usize, off_residual: f64 },

    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("matrix is singular to working tolerance (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("A not admissible for the Lyapunov equation (Kronecker pivot {pivot:e})")]
    LyapunovNotAdmissible { pivot: f64 },

    #[error("Riccati solve failed: {reason} (residual history {residual_history:?})")]
    CareFailed {
        reason: String,
        residual_history: Vec<f64>,
    },

    #[error("constraint set is empty: {0}")]
    Infeasible(String),

    #[error("iteration cap {iterations} reached (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("state is outside the strict-feasibility region")]
    OutsideFeasibleRegion,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
