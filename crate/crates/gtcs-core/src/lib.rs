//! Mode-wise compressive sensing of sparse tensors: multilinear
//! primitives, l1 solvers, measurement ensembles, low-rank
//! decompositions, recovery procedures, and an experiment harness.

pub mod decompose;
pub mod error;
pub mod harness;
pub mod io;
pub mod recovery;
pub mod sensing;
pub mod solver;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use solver::{SolverConfig, SolverStats};
pub use tensor::{DenseTensor, ModeIndex};
