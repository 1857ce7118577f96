use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tucker_core::testbed::{Decay, DEFAULT_GAMMA, DEFAULT_SPARSITY, DEFAULT_TERMS_BIG, DESK_C_DIMS, DESK_N};
use tucker_core::{Algorithm, SketchFamily};

#[derive(Debug, Parser)]
#[command(name = "tucker", version, about = "Randomized and shifted Tucker decompositions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a test tensor and write it as DTNS1.
    Gen(GenArgs),
    /// Decompose one tensor; writes core, factors and a JSON summary.
    Decompose(DecomposeArgs),
    /// Run an experiment grid and write one CSV row per cell and trial.
    Bench(BenchArgs),
    /// Evaluate the probabilistic error bound for a finished decomposition.
    Bound(BoundArgs),
}

/// Comma-separated list of non-negative integers, e.g. `5,5,5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(IntList)
    }
}

impl fmt::Display for IntList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecipeKind {
    /// Sparse rank-one sum with a weighted head, n x n x n.
    A,
    /// Orthogonally rotated diagonal tensor with a chosen decay.
    B,
    /// Sparse rank-one sum with unequal modes.
    C,
    /// Gaussian core times orthonormal factors.
    Exact,
}

/// Tensor source: exactly one of `--input` and `--recipe`.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// DTNS1 tensor file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generator recipe.
    #[arg(long, value_enum)]
    pub recipe: Option<RecipeKind>,
    /// Mode size for recipes `a` and `b`.
    #[arg(long, default_value_t = DESK_N)]
    pub n: usize,
    /// Mode sizes for recipes `c` and `exact`.
    #[arg(long)]
    pub dims: Option<IntList>,
    /// Spectrum of recipe `b`.
    #[arg(long, default_value = "fast")]
    pub decay: Decay,
    /// Tucker rank of recipe `exact`.
    #[arg(long)]
    pub true_ranks: Option<IntList>,
    /// Number of heavily weighted terms in recipe `a`.
    #[arg(long, default_value_t = DEFAULT_TERMS_BIG)]
    pub terms_big: usize,
    /// Weight of the heavy terms in recipe `a`.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub weight: f64,
    /// Fraction of nonzeros in the factor vectors of recipes `a` and `c`.
    #[arg(long, default_value_t = DEFAULT_SPARSITY)]
    pub sparsity: f64,
}

impl InputArgs {
    pub fn desk_c_dims() -> IntList {
        IntList(DESK_C_DIMS.to_vec())
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub algorithm: Algorithm,
    /// Target Tucker rank; a single value applies to every mode.
    #[arg(long)]
    pub ranks: IntList,
    /// Oversampling per mode; a single value applies to every mode.
    #[arg(long, default_value = "10")]
    pub oversample: IntList,
    /// Power iterations per mode.
    #[arg(long, default_value_t = 1)]
    pub power: usize,
    /// 1-based processing order, e.g. `3,2,1`.
    #[arg(long)]
    pub order: Option<IntList>,
    #[arg(long, default_value = "gaussian")]
    pub sketch: SketchFamily,
    /// Stop the power iteration with the PVE test at this tolerance.
    #[arg(long)]
    pub pve_tol: Option<f64>,
    /// Iteration cap of the PVE schedule.
    #[arg(long, default_value_t = 10_000)]
    pub qmax: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "tucker-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// JSON experiment plan; replaces the input and grid flags.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Algorithms to compare (repeat or comma-separate).
    #[arg(long = "algorithm", value_delimiter = ',')]
    pub algorithms: Vec<Algorithm>,
    /// Rank tuple; repeat the flag to sweep.
    #[arg(long)]
    pub ranks: Vec<IntList>,
    /// Oversampling; repeat the flag to sweep.
    #[arg(long, default_values = ["10"])]
    pub oversample: Vec<IntList>,
    /// Power iterations; repeat or comma-separate to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    pub power: Vec<usize>,
    #[arg(long)]
    pub order: Option<IntList>,
    /// Sketch families; repeat or comma-separate to sweep.
    #[arg(long, value_delimiter = ',', default_values = ["gaussian"])]
    pub sketch: Vec<SketchFamily>,
    #[arg(long)]
    pub pve_tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub qmax: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-configuration mean/median summary as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Leave the `seconds` column empty so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// `summary.json` written by `decompose`.
    #[arg(long)]
    pub summary: PathBuf,
    /// Gap index `j` (1-based, `1 <= j <= r`); defaults to `max(1, r - 1)`.
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long, default_value_t = tucker_core::bounds::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = tucker_core::bounds::DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Also write the report to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_list_parsing() {
        assert_eq!("3".parse::<IntList>().unwrap().0, vec![3]);
        assert_eq!("10, 5,2".parse::<IntList>().unwrap().0, vec![10, 5, 2]);
        assert!("1,,2".parse::<IntList>().is_err());
        assert!("-1".parse::<IntList>().is_err());
        assert_eq!(IntList(vec![2, 3]).to_string().parse::<IntList>().unwrap().0, vec![2, 3]);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
