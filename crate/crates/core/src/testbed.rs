//! Synthetic test tensors and the experiment runner.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TuckerError};
use crate::linalg::orth;
use crate::sketch::{derive_seed, gaussian_matrix, khatri_rao, RandomStream};
use crate::solvers::{relative_error, solve, Algorithm, Counters, SolverConfig};
use crate::tensor::{tendiag, DenseTensor};
use crate::Matrix;

/// Environment variable capping the worker threads of [`run_experiment`].
pub const THREADS_ENV: &str = "TUCKER_SKETCH_THREADS";

pub const PAPER_N: usize = 600;
pub const DESK_N: usize = 100;
pub const PAPER_C_DIMS: [usize; 3] = [600, 700, 800];
pub const DESK_C_DIMS: [usize; 3] = [60, 70, 80];
pub const DEFAULT_GAMMA: f64 = 1000.0;
pub const DEFAULT_SPARSITY: f64 = 0.05;
pub const DEFAULT_TERMS_BIG: usize = 50;

/// `sum_i w_i x_i o y_i o z_i` with `ceil(sparsity * n)`-sparse Gaussian factor
/// vectors; `w_i = gamma / i` for `i <= n_terms_big`, `1 / i` after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSumRecipe {
    pub dims: [usize; 3],
    pub n_terms: usize,
    pub n_terms_big: usize,
    pub gamma: f64,
    pub sparsity: f64,
}

impl SparseSumRecipe {
    pub fn weights(&self) -> Vec<f64> {
        (1..=self.n_terms)
            .map(|i| {
                if i <= self.n_terms_big {
                    self.gamma / i as f64
                } else {
                    1.0 / i as f64
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(TuckerError::Domain(format!("sparsity {} outside (0, 1]", self.sparsity)));
        }
        if self.dims.contains(&0) || self.n_terms == 0 {
            return Err(TuckerError::Domain("empty generator".into()));
        }
        if self.n_terms_big > self.n_terms {
            return Err(TuckerError::Domain(format!(
                "{} weighted terms exceed {} total terms",
                self.n_terms_big, self.n_terms
            )));
        }
        if !self.gamma.is_finite() {
            return Err(TuckerError::Domain(format!("gamma {} is not finite", self.gamma)));
        }
        Ok(())
    }

    /// Sparse factor matrices `X, Y, Z` (one column per term).
    pub fn factors(&self, seed: u64) -> Result<[Matrix; 3]> {
        self.validate()?;
        let mut stream = RandomStream::for_tensor(seed);
        let mut out = self.dims.map(|n| Matrix::zeros(n, self.n_terms));
        for i in 0..self.n_terms {
            for (f, &n) in out.iter_mut().zip(&self.dims) {
                let nnz = ((self.sparsity * n as f64) - 1e-9).ceil().max(1.0) as usize;
                for row in stream.sample_without_replacement(n, nnz.min(n)) {
                    f[(row, i)] = stream.next_gaussian();
                }
            }
        }
        Ok(out)
    }

    pub fn generate(&self, seed: u64) -> Result<DenseTensor> {
        let [x, y, z] = self.factors(seed)?;
        sum_of_rank_one(&self.weights(), &x, &y, &z)
    }
}

/// `sum_i w_i x_i o y_i o z_i`, formed as the mode-0 unfolding
/// `X diag(w) (Z kr Y)^T`.
pub fn sum_of_rank_one(w: &[f64], x: &Matrix, y: &Matrix, z: &Matrix) -> Result<DenseTensor> {
    if [x.ncols(), y.ncols(), z.ncols()].iter().any(|&c| c != w.len()) {
        return Err(TuckerError::DimensionMismatch("one weight per factor column".into()));
    }
    let mut xw = x.clone();
    for (j, &wj) in w.iter().enumerate() {
        xw.column_mut(j).scale_mut(wj);
    }
    let unfolded = xw * khatri_rao(z, y)?.transpose();
    DenseTensor::new(vec![x.nrows(), y.nrows(), z.nrows()], unfolded.as_slice().to_vec())
}

/// The sparse low-rank-plus-tail tensor, `n x n x n` with `n` terms.
pub fn gen_tensor_a(n: usize, n_terms_big: usize, gamma: f64, sparsity: f64, seed: u64) -> Result<DenseTensor> {
    if n < n_terms_big {
        return Err(TuckerError::Domain(format!("n = {n} below n_terms_big = {n_terms_big}")));
    }
    SparseSumRecipe {
        dims: [n; 3],
        n_terms: n,
        n_terms_big,
        gamma,
        sparsity,
    }
    .generate(seed)
}

/// The unequal-mode variant: `min(dims)` terms, the first `min(50, min(dims))` weighted.
pub fn gen_tensor_c(dims: [usize; 3], seed: u64) -> Result<DenseTensor> {
    let n_terms = *dims.iter().min().expect("three dims");
    SparseSumRecipe {
        dims,
        n_terms,
        n_terms_big: DEFAULT_TERMS_BIG.min(n_terms),
        gamma: DEFAULT_GAMMA,
        sparsity: DEFAULT_SPARSITY,
    }
    .generate(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    Slow,
    Fast,
    SShape,
}

impl Decay {
    pub fn name(self) -> &'static str {
        match self {
            Self::Slow => "slow",
            Self::Fast => "fast",
            Self::SShape => "s-shape",
        }
    }

    /// `v_i` for `i = 1..=n`.
    pub fn vector(self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| {
                let i = i as f64;
                match self {
                    Self::Slow => 1.0 / (i * i),
                    Self::Fast => (-i / 7.0).exp(),
                    Self::SShape => 0.001 + 1.0 / (1.0 + (i - 29.0).exp()),
                }
            })
            .collect()
    }
}

impl FromStr for Decay {
    type Err = TuckerError;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Slow, Self::Fast, Self::SShape]
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| TuckerError::InvalidConfig(format!("unknown decay `{s}`")))
    }
}

/// `tendiag(v) x_1 A_1 x_2 A_2 x_3 A_3` with `A_k` an orthonormal basis of a
/// square Gaussian matrix.
pub fn gen_tensor_b(n: usize, decay: Decay, seed: u64) -> Result<DenseTensor> {
    let mut t = tendiag(&decay.vector(n), &[n, n, n])?;
    for k in 0..3 {
        let basis = orth(&gaussian_matrix(n, n, derive_seed(seed, k as u64, 0xB))?);
        if basis.ncols() != n {
            return Err(TuckerError::Domain("Gaussian basis lost rank".into()));
        }
        t = t.mode_product(&basis, k)?;
    }
    Ok(t)
}

/// Random Gaussian core of size `ranks` times orthonormal Gaussian bases.
pub fn gen_exact_rank(dims: &[usize], ranks: &[usize], seed: u64) -> Result<DenseTensor> {
    crate::solvers::validate_ranks(ranks, dims)?;
    let mut stream = RandomStream::for_tensor(seed);
    let mut t = DenseTensor::from_fn(ranks.to_vec(), |_| stream.next_gaussian())?;
    for (k, (&n, &r)) in dims.iter().zip(ranks).enumerate() {
        let u = orth(&gaussian_matrix(n, r, derive_seed(seed, k as u64, 0xE))?);
        t = t.mode_product(&u, k)?;
    }
    Ok(t)
}

/// A tensor source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Recipe {
    A {
        n: usize,
        n_terms_big: usize,
        gamma: f64,
        sparsity: f64,
    },
    B {
        n: usize,
        decay: Decay,
    },
    C {
        dims: [usize; 3],
    },
    Exact {
        dims: Vec<usize>,
        ranks: Vec<usize>,
    },
    File {
        path: PathBuf,
    },
}

impl Recipe {
    pub fn desk_a() -> Self {
        Self::A {
            n: DESK_N,
            n_terms_big: DEFAULT_TERMS_BIG,
            gamma: DEFAULT_GAMMA,
            sparsity: DEFAULT_SPARSITY,
        }
    }

    pub fn desk_b(decay: Decay) -> Self {
        Self::B { n: DESK_N, decay }
    }

    pub fn desk_c() -> Self {
        Self::C { dims: DESK_C_DIMS }
    }

    pub fn build(&self, seed: u64) -> Result<DenseTensor> {
        match self {
            Self::A {
                n,
                n_terms_big,
                gamma,
                sparsity,
            } => gen_tensor_a(*n, *n_terms_big, *gamma, *sparsity, seed),
            Self::B { n, decay } => gen_tensor_b(*n, *decay, seed),
            Self::C { dims } => gen_tensor_c(*dims, seed),
            Self::Exact { dims, ranks } => gen_exact_rank(dims, ranks, seed),
            Self::File { path } => crate::io::load_tensor(path),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::A { n, .. } => write!(f, "a{n}"),
            Self::B { n, decay } => write!(f, "b{n}-{}", decay.name()),
            Self::C { dims } => write!(f, "c{}x{}x{}", dims[0], dims[1], dims[2]),
            Self::Exact { dims, .. } => {
                let dims: Vec<String> = dims.iter().map(|n| n.to_string()).collect();
                write!(f, "exact{}", dims.join("x"))
            }
            Self::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub recipe: Recipe,
    /// Seed of the generated tensor; shared by every cell.
    pub tensor_seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Grid of configurations; their `seed` and `trial` fields are overwritten
    /// per trial.
    pub configs: Vec<SolverConfig>,
    pub trials: usize,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(TuckerError::InvalidConfig("an experiment needs at least one trial".into()));
        }
        if self.algorithms.is_empty() || self.configs.is_empty() {
            return Err(TuckerError::InvalidConfig("empty algorithm list or configuration grid".into()));
        }
        Ok(())
    }

    /// Seed of trial `trial`, shared by every algorithm so that trials are paired.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, u64::MAX, trial as u64)
    }

    /// `(config index, algorithm, trial)` in report order.
    pub fn cells(&self) -> Vec<(usize, Algorithm, usize)> {
        let mut cells = Vec::new();
        for ci in 0..self.configs.len() {
            for &alg in &self.algorithms {
                for trial in 0..self.trials {
                    cells.push((ci, alg, trial));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub recipe: String,
    /// Index into the plan's configuration grid.
    pub config_index: usize,
    pub config: SolverConfig,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the cell failed.
    pub re: Option<f64>,
    pub seconds: f64,
    pub counters: Counters,
    pub powers: Vec<usize>,
    /// Final shift of each processed mode, in processing order.
    pub final_alphas: Vec<f64>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Final shift of the last processed mode.
    pub fn alpha_final(&self) -> Option<f64> {
        self.final_alphas.last().copied()
    }
}

/// Runs one cell: `algorithm` on `t` with `cfg`, timing the solver and the
/// error evaluation separately from tensor generation.
pub fn run_cell(t: &DenseTensor, algorithm: Algorithm, cfg: &SolverConfig) -> (Result<crate::solvers::Solution>, f64) {
    let start = Instant::now();
    let sol = solve(algorithm, t, cfg);
    (sol, start.elapsed().as_secs_f64())
}

fn report_for(plan: &ExperimentPlan, t: &DenseTensor, (ci, algorithm, trial): (usize, Algorithm, usize)) -> RunReport {
    let seed = plan.trial_seed(trial);
    let config = plan.configs[ci].clone().with_seed(seed).with_trial(trial as u64);
    let (result, seconds) = run_cell(t, algorithm, &config);
    let mut report = RunReport {
        algorithm,
        recipe: plan.recipe.to_string(),
        config_index: ci,
        config,
        trial,
        seed,
        re: None,
        seconds,
        counters: Counters::default(),
        powers: Vec::new(),
        final_alphas: Vec::new(),
        error: None,
    };
    match result.and_then(|sol| relative_error(t, &sol.factorization).map(|re| (sol, re))) {
        Ok((sol, re)) => {
            report.re = Some(re);
            report.counters = sol.counters;
            report.powers = sol.powers;
            report.final_alphas = sol.trace.modes.iter().map(|m| m.final_alpha).collect();
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every `(config, algorithm, trial)` cell of `plan`. Cells run
/// concurrently (capped by `TUCKER_SKETCH_THREADS`); reports come back in
/// [`ExperimentPlan::cells`] order. A failing cell is reported with its error
/// instead of aborting the grid.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<RunReport>> {
    plan.validate()?;
    let t = plan.recipe.build(plan.tensor_seed)?;
    run_experiment_on(plan, &t)
}

/// As [`run_experiment`] with a prebuilt tensor.
pub fn run_experiment_on(plan: &ExperimentPlan, t: &DenseTensor) -> Result<Vec<RunReport>> {
    plan.validate()?;
    let cells = plan.cells();
    let work = || cells.par_iter().map(|&cell| report_for(plan, t, cell)).collect::<Vec<_>>();
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| TuckerError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Mean over values sorted ascending, so the result does not depend on input order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub config_index: usize,
    pub runs: usize,
    pub failures: usize,
    pub mean_re: Option<f64>,
    pub median_re: Option<f64>,
    pub mean_seconds: Option<f64>,
    pub median_seconds: Option<f64>,
}

/// Aggregates successful trials per `(config, algorithm)`, in first-seen order.
pub fn summarize(reports: &[RunReport]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, Algorithm)> = Vec::new();
    for r in reports {
        if !keys.contains(&(r.config_index, r.algorithm)) {
            keys.push((r.config_index, r.algorithm));
        }
    }
    keys.sort_by_key(|&(ci, alg)| (ci, Algorithm::ALL.iter().position(|&a| a == alg)));
    keys.into_iter()
        .map(|(ci, alg)| {
            let group: Vec<&RunReport> = reports.iter().filter(|r| r.config_index == ci && r.algorithm == alg).collect();
            let ok: Vec<&&RunReport> = group.iter().filter(|r| !r.failed()).collect();
            let res: Vec<f64> = ok.iter().filter_map(|r| r.re).collect();
            let secs: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
            CellSummary {
                algorithm: alg,
                config_index: ci,
                runs: group.len(),
                failures: group.len() - ok.len(),
                mean_re: mean(&res),
                median_re: median(&res),
                mean_seconds: mean(&secs),
                median_seconds: median(&secs),
            }
        })
        .collect()
}
