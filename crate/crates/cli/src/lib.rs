//! The `tucker` command line: `gen`, `decompose`, `bench` and `bound`.
//!
//! Exit status: 0 success, 2 invalid configuration, 3 I/O failure,
//! 4 solver failure, 5 violated theorem hypothesis.

pub mod args;
pub mod commands;
pub mod error;

pub use args::Cli;
pub use commands::{cmd_bound, cmd_decompose, reports_to_csv, run, BoundOutput, DecomposeSummary, CSV_HEADER};
pub use error::{CliError, CliResult};
