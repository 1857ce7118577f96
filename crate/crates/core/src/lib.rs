//! Tucker decomposition with deterministic, randomized and shifted randomized
//! HOSVD / ST-HOSVD solvers, their probabilistic error bounds, and synthetic
//! test tensors.
//!
//! Mode indices and processing orders are 0-based throughout this crate.

pub mod bounds;
pub mod error;
pub mod io;
pub mod linalg;
pub mod sketch;
pub mod solvers;
pub mod tensor;
pub mod testbed;

/// Dense column-major `f64` matrix.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Result, TuckerError};
pub use linalg::{econ_svd, left_singular, orth, tail_energy, truncated_svd, EconSvd};
pub use sketch::{draw_sketch, gaussian_matrix, khatri_rao, kronecker, uniform_matrix, SketchFamily, SketchSpec};
pub use solvers::{
    relative_error, reconstruct, solve, Algorithm, Counters, PowerSchedule, ShiftTrace, Solution, SolverConfig,
    TuckerFactorization,
};
pub use tensor::{tendiag, DenseTensor};
