//! Fixed Tucker-rank solvers.
//!
//! | [`Algorithm`]       | method                                             |
//! |---------------------|----------------------------------------------------|
//! | `Thosvd`            | truncated HOSVD                                    |
//! | `Sthosvd`           | sequentially truncated HOSVD                       |
//! | `RandThosvd`        | sketch + plain power iteration, original unfolding |
//! | `RandSthosvd`       | sketch + plain power iteration, shrinking core     |
//! | `ShiftedThosvd`     | adaptive-shift power iteration, original unfolding |
//! | `ShiftedSthosvd`    | adaptive-shift power iteration, shrinking core     |
//! | `Holistic`          | compress to an `l`-sized core, then ST-HOSVD       |
//! | `HolisticShifted`   | as `Holistic` with shifted power iteration         |
//! | `Pve`               | `ShiftedSthosvd` with PVE-controlled power count   |

mod holistic;
mod hosvd;
mod randomized;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TuckerError};
use crate::sketch::SketchFamily;
use crate::tensor::DenseTensor;
use crate::Matrix;

pub use holistic::holistic_rand_sthosvd;
pub use hosvd::{sthosvd, thosvd};
pub use randomized::{pve_shifted_sthosvd, rand_sthosvd, rand_thosvd, shifted_rand_sthosvd, shifted_rand_thosvd};

/// Iterates of the shifted loop whose `l`-th singular value falls below this
/// fraction of the first are treated as rank-deficient and leave the shift alone.
pub const DEGENERATE_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactorization {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerFactorization {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(TuckerError::DimensionMismatch(format!(
                "{} factors for a core with {} modes",
                factors.len(),
                core.order()
            )));
        }
        for (k, (u, &r)) in factors.iter().zip(core.dims()).enumerate() {
            if u.ncols() != r || u.nrows() == 0 {
                return Err(TuckerError::DimensionMismatch(format!(
                    "factor {k} is {}x{}, core mode has size {r}",
                    u.nrows(),
                    u.ncols()
                )));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        reconstruct(self)
    }
}

/// `G x_1 U_1 ... x_d U_d`.
pub fn reconstruct(f: &TuckerFactorization) -> Result<DenseTensor> {
    let mut t = f.core.clone();
    for (k, u) in f.factors.iter().enumerate() {
        t = t.mode_product(u, k)?;
    }
    Ok(t)
}

/// `||t - reconstruct(f)||_F / ||t||_F`.
pub fn relative_error(t: &DenseTensor, f: &TuckerFactorization) -> Result<f64> {
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(TuckerError::ZeroNorm);
    }
    Ok(t.sub(&reconstruct(f)?)?.frobenius_norm() / norm)
}

/// `t x_1 U_1^T ... x_d U_d^T` in the given mode order.
pub fn project_core(t: &DenseTensor, factors: &[Matrix], order: &[usize]) -> Result<DenseTensor> {
    let mut g = t.clone();
    for &k in order {
        g = g.contract(&factors[k], k)?;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerSchedule {
    Fixed(usize),
    /// Stop once the top-`r` shifted singular value estimates move by at most
    /// `tol * sigma_{r+1}`, or after `q_max` iterations.
    Pve { tol: f64, q_max: usize },
}

impl PowerSchedule {
    pub const DEFAULT_PVE_TOL: f64 = 0.5;
    pub const DEFAULT_Q_MAX: usize = 10_000;

    pub fn default_pve() -> Self {
        Self::Pve {
            tol: Self::DEFAULT_PVE_TOL,
            q_max: Self::DEFAULT_Q_MAX,
        }
    }

    pub fn max_iterations(&self) -> usize {
        match *self {
            Self::Fixed(q) => q,
            Self::Pve { q_max, .. } => q_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub ranks: Vec<usize>,
    pub oversampling: Vec<usize>,
    pub power: PowerSchedule,
    /// Processing order of the modes, 0-based; `None` is `0, 1, ..., d-1`.
    pub order: Option<Vec<usize>>,
    pub sketch: SketchFamily,
    pub seed: u64,
    pub trial: u64,
    pub shift: bool,
}

impl SolverConfig {
    pub const DEFAULT_OVERSAMPLING: usize = 10;
    pub const DEFAULT_POWER: usize = 1;

    pub fn new(ranks: Vec<usize>) -> Self {
        let d = ranks.len();
        Self {
            ranks,
            oversampling: vec![Self::DEFAULT_OVERSAMPLING; d],
            power: PowerSchedule::Fixed(Self::DEFAULT_POWER),
            order: None,
            sketch: SketchFamily::Gaussian,
            seed: 0,
            trial: 0,
            shift: false,
        }
    }

    pub fn with_oversampling(mut self, s: usize) -> Self {
        self.oversampling = vec![s; self.ranks.len()];
        self
    }

    pub fn with_power(mut self, q: usize) -> Self {
        self.power = PowerSchedule::Fixed(q);
        self
    }

    pub fn with_pve(mut self, tol: f64, q_max: usize) -> Self {
        self.power = PowerSchedule::Pve { tol, q_max };
        self
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn with_sketch(mut self, family: SketchFamily) -> Self {
        self.sketch = family;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }

    pub fn with_shift(mut self, shift: bool) -> Self {
        self.shift = shift;
        self
    }

    /// Sketch widths `l_k = r_k + s_k`.
    pub fn sketch_widths(&self) -> Vec<usize> {
        self.ranks.iter().zip(&self.oversampling).map(|(r, s)| r + s).collect()
    }

    pub fn processing_order(&self, d: usize) -> Result<Vec<usize>> {
        match &self.order {
            None => Ok((0..d).collect()),
            Some(order) => {
                validate_order(order, d)?;
                Ok(order.clone())
            }
        }
    }

    /// Checks ranks and order against `dims`; with `sketched`, also the sketch
    /// widths and power schedule.
    pub fn validate(&self, dims: &[usize], sketched: bool) -> Result<()> {
        validate_ranks(&self.ranks, dims)?;
        self.processing_order(dims.len())?;
        if !sketched {
            return Ok(());
        }
        if self.oversampling.len() != dims.len() {
            return Err(TuckerError::InvalidConfig(format!(
                "{} oversampling values for {} modes",
                self.oversampling.len(),
                dims.len()
            )));
        }
        let total: usize = dims.iter().product();
        for (k, l) in self.sketch_widths().into_iter().enumerate() {
            let limit = dims[k].min(total / dims[k]);
            if l > limit {
                return Err(TuckerError::InvalidConfig(format!(
                    "mode {k}: sketch width r + s = {l} exceeds min(n_k, prod of other dims) = {limit}"
                )));
            }
        }
        if let PowerSchedule::Pve { tol, q_max } = self.power {
            if !(tol > 0.0 && tol <= 1.0) {
                return Err(TuckerError::InvalidConfig(format!("PVE tolerance {tol} outside (0, 1]")));
            }
            if q_max < 1 {
                return Err(TuckerError::InvalidConfig("PVE needs q_max >= 1".into()));
            }
            if self.oversampling.contains(&0) {
                return Err(TuckerError::InvalidConfig(
                    "PVE compares against sigma_{r+1}, so every oversampling must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_ranks(ranks: &[usize], dims: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(TuckerError::InvalidRank(format!(
            "{} ranks for a tensor with {} modes",
            ranks.len(),
            dims.len()
        )));
    }
    for (k, (&r, &n)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > n {
            return Err(TuckerError::InvalidRank(format!("mode {k}: rank {r} outside 1..={n}")));
        }
    }
    Ok(())
}

pub(crate) fn validate_order(order: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if order.len() != d {
        return Err(TuckerError::InvalidConfig(format!("order {order:?} is not a permutation of {d} modes")));
    }
    for &k in order {
        if k >= d || seen[k] {
            return Err(TuckerError::InvalidConfig(format!("order {order:?} is not a permutation of {d} modes")));
        }
        seen[k] = true;
    }
    Ok(())
}

/// One shifted (or plain) power iteration of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Shift applied in this iteration.
    pub alpha: f64,
    /// Smallest (`l`-th) singular value of the iterate.
    pub sigma_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrace {
    pub mode: usize,
    pub records: Vec<ShiftRecord>,
    pub final_alpha: f64,
}

/// Per-mode shift histories, in processing order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftTrace {
    pub modes: Vec<ModeTrace>,
}

impl ShiftTrace {
    pub fn for_mode(&self, mode: usize) -> Option<&ModeTrace> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// Shifts used by mode `mode`, one per iteration.
    pub fn alphas(&self, mode: usize) -> Vec<f64> {
        self.for_mode(mode)
            .map(|m| m.records.iter().map(|r| r.alpha).collect())
            .unwrap_or_default()
    }

    /// Final shift of the last processed mode.
    pub fn last_final_alpha(&self) -> Option<f64> {
        self.modes.last().map(|m| m.final_alpha)
    }
}

/// Operation tallies: `mm` sums `m*n*p` over matrix products and mode
/// products, `svd` sums `m*n*min(m, n)` over SVDs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub mm: u64,
    pub svd: u64,
}

impl Counters {
    pub(crate) fn product(&mut self, m: usize, n: usize, p: usize) {
        self.mm += (m as u64) * (n as u64) * (p as u64);
    }

    pub(crate) fn svd(&mut self, m: usize, n: usize) {
        self.svd += (m as u64) * (n as u64) * (m.min(n) as u64);
    }

    pub(crate) fn contraction(&mut self, t: &DenseTensor, k: usize, r: usize) {
        self.product(r, t.dims()[k], t.complement_size(k));
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub algorithm: Algorithm,
    pub factorization: TuckerFactorization,
    pub trace: ShiftTrace,
    /// Power iterations performed per mode (indexed by mode).
    pub powers: Vec<usize>,
    pub counters: Counters,
    /// Squared projection residuals `||G x_k (I - U_k U_k^T)||_F^2` of each
    /// sequential step, in processing order; empty for the T-HOSVD family.
    pub step_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Thosvd,
    Sthosvd,
    RandThosvd,
    RandSthosvd,
    ShiftedThosvd,
    ShiftedSthosvd,
    Holistic,
    HolisticShifted,
    Pve,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Self::Thosvd,
        Self::Sthosvd,
        Self::RandThosvd,
        Self::RandSthosvd,
        Self::ShiftedThosvd,
        Self::ShiftedSthosvd,
        Self::Holistic,
        Self::HolisticShifted,
        Self::Pve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Thosvd => "thosvd",
            Self::Sthosvd => "sthosvd",
            Self::RandThosvd => "rand-thosvd",
            Self::RandSthosvd => "rand-sthosvd",
            Self::ShiftedThosvd => "shifted-thosvd",
            Self::ShiftedSthosvd => "shifted-sthosvd",
            Self::Holistic => "holistic",
            Self::HolisticShifted => "holistic-shifted",
            Self::Pve => "pve",
        }
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, Self::Thosvd | Self::Sthosvd)
    }

    pub fn is_shifted(self) -> bool {
        matches!(self, Self::ShiftedThosvd | Self::ShiftedSthosvd | Self::HolisticShifted | Self::Pve)
    }

    /// Factors come from the original unfoldings rather than a shrinking core.
    pub fn is_t_family(self) -> bool {
        matches!(self, Self::Thosvd | Self::RandThosvd | Self::ShiftedThosvd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = TuckerError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| TuckerError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Runs `algorithm` on `t`. The shift flag of `cfg` is overridden to match the
/// algorithm; `Pve` falls back to the default PVE schedule when `cfg` carries a
/// fixed power count.
pub fn solve(algorithm: Algorithm, t: &DenseTensor, cfg: &SolverConfig) -> Result<Solution> {
    let mut cfg = cfg.clone();
    cfg.shift = algorithm.is_shifted();
    match algorithm {
        Algorithm::Thosvd => hosvd::thosvd_solution(t, &cfg),
        Algorithm::Sthosvd => hosvd::sthosvd_solution(t, &cfg),
        Algorithm::RandThosvd | Algorithm::ShiftedThosvd => {
            randomized::run(t, &cfg, randomized::Branch::Original, algorithm)
        }
        Algorithm::RandSthosvd | Algorithm::ShiftedSthosvd => {
            randomized::run(t, &cfg, randomized::Branch::Sequential, algorithm)
        }
        Algorithm::Pve => {
            if matches!(cfg.power, PowerSchedule::Fixed(_)) {
                cfg.power = PowerSchedule::default_pve();
            }
            randomized::run(t, &cfg, randomized::Branch::Sequential, algorithm)
        }
        Algorithm::Holistic | Algorithm::HolisticShifted => holistic::run(t, &cfg, algorithm),
    }
}
