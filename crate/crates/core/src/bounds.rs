//! Probabilistic error bounds for the shifted randomized solvers, the failure
//! probabilities they hold with, and the Gaussian extreme-singular-value
//! tail floors behind them.
//!
//! All powers are evaluated in log space, so the terms with exponents in the
//! thousands underflow cleanly to zero instead of producing `0 * inf`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TuckerError};
use crate::linalg::{econ_svd, tail_energy};
use crate::solvers::{ShiftTrace, SolverConfig};
use crate::tensor::DenseTensor;

pub const DEFAULT_BETA: f64 = 2.0;
pub const DEFAULT_GAMMA: f64 = 2.0;

pub fn default_j(r: usize) -> usize {
    r.saturating_sub(1).max(1)
}

/// Inputs of the bound evaluators, one entry per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub oversampling: Vec<usize>,
    /// Processing order used by the sequential bound.
    pub order: Vec<usize>,
    pub j: Vec<usize>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Realized shifts `alpha_t` of each mode, one per power iteration.
    pub alphas: Vec<Vec<f64>>,
    /// Singular values of each unfolding `A_(k)`, descending.
    pub spectra: Vec<Vec<f64>>,
}

impl BoundParams {
    /// Default knobs `j_k = max(1, r_k - 1)`, `beta_k = gamma_k = 2`, natural order.
    pub fn new(
        dims: Vec<usize>,
        ranks: Vec<usize>,
        oversampling: Vec<usize>,
        alphas: Vec<Vec<f64>>,
        spectra: Vec<Vec<f64>>,
    ) -> Self {
        let d = dims.len();
        Self {
            j: ranks.iter().map(|&r| default_j(r)).collect(),
            beta: vec![DEFAULT_BETA; d],
            gamma: vec![DEFAULT_GAMMA; d],
            order: (0..d).collect(),
            dims,
            ranks,
            oversampling,
            alphas,
            spectra,
        }
    }

    /// Annotates a solver run: spectra come from the unfoldings of `t`, shifts
    /// from the run's trace.
    pub fn from_run(t: &DenseTensor, cfg: &SolverConfig, trace: &ShiftTrace) -> Result<Self> {
        let spectra = (0..t.order())
            .map(|k| Ok(econ_svd(&t.unfold(k)?)?.s))
            .collect::<Result<Vec<_>>>()?;
        let alphas = (0..t.order()).map(|k| trace.alphas(k)).collect();
        let mut p = Self::new(t.dims().to_vec(), cfg.ranks.clone(), cfg.oversampling.clone(), alphas, spectra);
        p.order = cfg.processing_order(t.order())?;
        Ok(p)
    }

    pub fn with_knobs(mut self, j: Option<usize>, beta: f64, gamma: f64) -> Self {
        if let Some(j) = j {
            self.j = vec![j; self.dims.len()];
        }
        self.beta = vec![beta; self.dims.len()];
        self.gamma = vec![gamma; self.dims.len()];
        self
    }

    fn order_len(&self) -> usize {
        self.dims.len()
    }

    fn l(&self, k: usize) -> usize {
        self.ranks[k] + self.oversampling[k]
    }

    /// `prod_{i != k} n_i`.
    fn complement(&self, k: usize) -> f64 {
        (0..self.order_len()).filter(|&i| i != k).map(|i| self.dims[i] as f64).product()
    }

    /// Sketch rows of the sequential solver at mode `k`: already processed
    /// modes contribute `r_i`, the rest `n_i`.
    fn sequential_complement(&self, k: usize) -> f64 {
        let pos = self.order.iter().position(|&m| m == k).expect("validated order");
        (0..self.order_len())
            .filter(|&i| i != k)
            .map(|i| {
                if self.order[..pos].contains(&i) {
                    self.ranks[i] as f64
                } else {
                    self.dims[i] as f64
                }
            })
            .product()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dims.len();
        let lens = [
            self.ranks.len(),
            self.oversampling.len(),
            self.order.len(),
            self.j.len(),
            self.beta.len(),
            self.gamma.len(),
            self.alphas.len(),
            self.spectra.len(),
        ];
        if d == 0 || lens.iter().any(|&n| n != d) {
            return Err(TuckerError::DimensionMismatch(format!("bound inputs for {d} modes have lengths {lens:?}")));
        }
        crate::solvers::validate_order(&self.order, d)?;
        for k in 0..d {
            if !(self.beta[k] > 1.0 && self.gamma[k] > 1.0) {
                return Err(TuckerError::Domain(format!(
                    "mode {k}: beta = {}, gamma = {} must exceed 1",
                    self.beta[k], self.gamma[k]
                )));
            }
            if self.j[k] == 0 || self.j[k] > self.ranks[k] {
                return Err(TuckerError::Domain(format!(
                    "mode {k}: j = {} outside 1..={}",
                    self.j[k], self.ranks[k]
                )));
            }
        }
        Ok(())
    }
}

fn ln_t1(m: f64, beta: f64) -> f64 {
    -0.5 * (2.0 * PI * m).ln() + m * (1.0 - (m * beta).ln())
}

/// `1/(4(g^2-1) sqrt(pi n g^2)) (2 g^2 / e^{g^2-1})^n`
fn largest_sv_tail(n: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    let ln = -(4.0 * (g2 - 1.0)).ln() - 0.5 * (PI * n * g2).ln() + n * ((2.0 * g2).ln() - (g2 - 1.0));
    ln.exp()
}

/// `1/(4(g^2-1) sqrt(pi N g^2)) (2 g^2 / (e^{g^2} - 1))^N`
fn complement_tail(n: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    let ln_base = (2.0 * g2).ln() - (g2 + (-(-g2).exp()).ln_1p());
    (-(4.0 * (g2 - 1.0)).ln() - 0.5 * (PI * n * g2).ln() + n * ln_base).exp()
}

fn failure_probability(l: usize, j: usize, beta: f64, gamma: f64, n_small: f64, n_big: f64) -> f64 {
    let m = (l - j + 1) as f64;
    let l = l as f64;
    ln_t1(m, beta).exp()
        + largest_sv_tail(l, gamma)
        + largest_sv_tail(n_small.min(l), gamma)
        + complement_tail(n_big, gamma)
}

fn check_mode(p: &BoundParams, k: usize) -> Result<()> {
    p.validate()?;
    if k >= p.order_len() {
        return Err(TuckerError::ModeOutOfRange {
            mode: k,
            order: p.order_len(),
        });
    }
    Ok(())
}

/// Failure probability `Phi_k` of the T-HOSVD bound. May be `+inf` when the
/// printed expression exceeds the `f64` range.
pub fn phi_k(p: &BoundParams, k: usize) -> Result<f64> {
    check_mode(p, k)?;
    let n_big = p.complement(k);
    let n_hat = (p.dims[k] as f64).min(n_big);
    Ok(failure_probability(p.l(k), p.j[k], p.beta[k], p.gamma[k], n_hat, n_big))
}

/// Failure probability `Psi_k` of the sequential bound, with the dimension
/// products of the shrinking core.
pub fn psi_k(p: &BoundParams, k: usize) -> Result<f64> {
    check_mode(p, k)?;
    let n_big = p.sequential_complement(k);
    let n_tilde = (p.dims[k] as f64).min(n_big);
    Ok(failure_probability(p.l(k), p.j[k], p.beta[k], p.gamma[k], n_tilde, n_big))
}

fn sigma(s: &[f64], i: usize) -> f64 {
    // 1-based; singular values past the end are zero.
    s.get(i - 1).copied().unwrap_or(0.0)
}

/// `prod_t |sigma_i^2 - alpha_t| / prod_t (sigma_j^2 - alpha_t)`.
fn shifted_ratio(s: &[f64], i: usize, j: usize, alphas: &[f64]) -> f64 {
    let (si, sj) = (sigma(s, i).powi(2), sigma(s, j).powi(2));
    alphas.iter().map(|&a| (si - a).abs() / (sj - a)).product()
}

/// `(sigma_i - alpha) / (sigma_j - alpha)`, the per-iteration deflation factor.
pub fn deflation_ratio(sigma_i: f64, sigma_j: f64, alpha: f64) -> f64 {
    (sigma_i - alpha) / (sigma_j - alpha)
}

fn check_shifts(p: &BoundParams, k: usize) -> Result<()> {
    let sj2 = sigma(&p.spectra[k], p.j[k]).powi(2);
    if let Some(a) = p.alphas[k].iter().find(|&&a| !(a < sj2)) {
        return Err(TuckerError::Hypothesis(format!(
            "mode {k}: shift {a} is not below sigma_j^2 = {sj2}"
        )));
    }
    Ok(())
}

/// `Delta_j = sqrt(sum_{i=j+1}^{r} sigma_i^2)`.
fn head_gap(s: &[f64], j: usize, r: usize) -> f64 {
    s.iter().skip(j).take(r.saturating_sub(j)).map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-hand side of the T-HOSVD bound, without hypothesis checks beyond the
/// parameter domains.
pub fn thosvd_bound_value(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let mut total = 0.0;
    for k in 0..p.order_len() {
        check_shifts(p, k)?;
        let (s, r, j, l) = (&p.spectra[k], p.ranks[k], p.j[k], p.l(k) as f64);
        let n_big = p.complement(k);
        let n_hat = (p.dims[k] as f64).min(n_big);
        let gamma = p.gamma[k];
        let ratio_j = shifted_ratio(s, j + 1, j, &p.alphas[k]);
        let ratio_r = shifted_ratio(s, r + 1, j, &p.alphas[k]);
        let f = (2.0 * l).sqrt() * gamma * ratio_j + 1.0;
        let g = (2.0 * n_hat.min(l)).sqrt() * gamma * ratio_r + 1.0 + (2.0 * n_big * l).sqrt() * p.beta[k] * gamma * ratio_r;
        total += f * head_gap(s, j, r) + g * tail_energy(s, r);
    }
    Ok(2.0 * total)
}

/// Right-hand side of the rough sequential bound; uses the spectra of the
/// original unfoldings and no shift ratios.
pub fn sthosvd_bound_value(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let mut total = 0.0;
    for k in 0..p.order_len() {
        let (s, r, j, l) = (&p.spectra[k], p.ranks[k], p.j[k], p.l(k) as f64);
        let n_big = p.sequential_complement(k);
        let n_tilde = (p.dims[k] as f64).min(n_big);
        let gamma = p.gamma[k];
        let tail = tail_energy(s, r);
        total += ((2.0 * l).sqrt() * gamma + 1.0) * head_gap(s, j, r)
            + ((2.0 * n_tilde.min(l)).sqrt() * gamma + 1.0) * tail
            + (2.0 * n_big * l).sqrt() * p.beta[k] * gamma * tail;
    }
    Ok(2.0 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Upper bound on `||A - A_hat||_F`.
    pub bound: f64,
    /// `sum_k Phi_k` (or `Psi_k`).
    pub failure_sum: f64,
    /// `1 - failure_sum`, the probability the bound holds with.
    pub probability: f64,
}

fn gate(failure_sum: f64) -> Result<()> {
    if !(failure_sum > 0.0 && failure_sum < 1.0) {
        return Err(TuckerError::Hypothesis(format!(
            "failure probabilities sum to {failure_sum}, outside (0, 1)"
        )));
    }
    Ok(())
}

fn check_width(p: &BoundParams, k: usize, n_small: f64) -> Result<()> {
    let l = p.l(k) as f64;
    if l > n_small - p.ranks[k] as f64 {
        return Err(TuckerError::Hypothesis(format!(
            "mode {k}: l = {l} exceeds {n_small} - r = {}",
            n_small - p.ranks[k] as f64
        )));
    }
    Ok(())
}

/// Bound for the (shifted) randomized T-HOSVD and its probability floor.
pub fn thosvd_error_bound(p: &BoundParams) -> Result<BoundReport> {
    p.validate()?;
    let mut failure_sum = 0.0;
    for k in 0..p.order_len() {
        check_width(p, k, (p.dims[k] as f64).min(p.complement(k)))?;
        failure_sum += phi_k(p, k)?;
    }
    gate(failure_sum)?;
    Ok(BoundReport {
        bound: thosvd_bound_value(p)?,
        failure_sum,
        probability: 1.0 - failure_sum,
    })
}

/// Rough bound for the (shifted) randomized ST-HOSVD and its probability floor.
pub fn sthosvd_error_bound(p: &BoundParams) -> Result<BoundReport> {
    p.validate()?;
    let mut failure_sum = 0.0;
    for k in 0..p.order_len() {
        check_width(p, k, (p.dims[k] as f64).min(p.sequential_complement(k)))?;
        failure_sum += psi_k(p, k)?;
    }
    gate(failure_sum)?;
    Ok(BoundReport {
        bound: sthosvd_bound_value(p)?,
        failure_sum,
        probability: 1.0 - failure_sum,
    })
}

/// Probability floor for `sigma_max(Omega) <= sqrt(2n) gamma`, `Omega` an
/// `l x n` standard Gaussian matrix.
pub fn largest_singular_value_floor(n: usize, gamma: f64) -> Result<f64> {
    if n == 0 || !(gamma > 1.0) {
        return Err(TuckerError::Domain(format!("need n >= 1 and gamma > 1, got n = {n}, gamma = {gamma}")));
    }
    let floor = 1.0 - largest_sv_tail(n as f64, gamma);
    if !(floor >= 0.0) {
        return Err(TuckerError::Domain(format!("floor {floor} is negative for n = {n}, gamma = {gamma}")));
    }
    Ok(floor)
}

/// Probability floor for `sigma_min(Omega) >= 1/(sqrt(n) beta)`, `Omega` an
/// `l x n` standard Gaussian matrix with `l <= n`.
pub fn smallest_singular_value_floor(n: usize, l: usize, beta: f64) -> Result<f64> {
    if l == 0 || l > n || !(beta > 1.0) {
        return Err(TuckerError::Domain(format!(
            "need 1 <= l <= n and beta > 1, got n = {n}, l = {l}, beta = {beta}"
        )));
    }
    let floor = 1.0 - ln_t1((n - l + 1) as f64, beta).exp();
    if !(floor >= 0.0) {
        return Err(TuckerError::Domain(format!("floor {floor} is negative for n = {n}, l = {l}, beta = {beta}")));
    }
    Ok(floor)
}
