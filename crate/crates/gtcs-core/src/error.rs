//! Error types shared across the crate.

use crate::solver::SolverStats;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// Dimensions of two arguments do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Mode index outside 1..=d.
    #[error("invalid mode index {mode} for order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    /// Tensor data contains NaN or infinite entries.
    #[error("non-finite entry at linear index {index}")]
    NonFinite { index: usize },

    /// The iteration budget was exhausted before the residuals dropped
    /// below the termination tolerance. The last iterate is attached so
    /// the caller can decide whether to accept it.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        solution: Vec<f64>,
        stats: SolverStats,
        residual: f64,
        iterations: usize,
    },

    /// The right-hand side lies outside the range of the operator.
    #[error("infeasible system: right-hand side outside operator range (distance {distance:.3e})")]
    InfeasibleSystem { distance: f64 },

    /// The synthesis basis is not orthonormal.
    #[error("basis is not orthonormal: max |PhiT Phi - I| = {deviation:.3e}")]
    NonOrthonormalBasis { deviation: f64 },

    /// Materializing an operator would exceed the element cap.
    #[error("operator of {elements} elements exceeds cap {cap}")]
    SizeOverflow { elements: u128, cap: u128 },

    /// A least-squares subproblem of CP-ALS stayed singular across restarts.
    #[error("rank-deficient CP-ALS update at rank {rank}")]
    RankDeficientUpdate { rank: usize },

    /// A recovery subproblem failed; tagged with its position in the schedule.
    #[error("recovery failed at mode {mode}, subproblem {index}: {source}")]
    RecoveryAt {
        mode: usize,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// The requested phantom support does not fit the dimensions.
    #[error("infeasible support spec: {0}")]
    InfeasibleSupportSpec(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed GTCS1 stream.
    #[error("invalid GTCS1 data: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
