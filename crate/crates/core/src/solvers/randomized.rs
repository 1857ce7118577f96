//! Sketch-and-power-iteration solvers, with and without the adaptive shift.

use super::{
    Algorithm, Counters, ModeTrace, PowerSchedule, ShiftRecord, ShiftTrace, Solution, SolverConfig,
    TuckerFactorization, DEGENERATE_RATIO,
};
use crate::error::{Result, TuckerError};
use crate::linalg::{left_singular, orth};
use crate::sketch::{derive_seed, draw_sketch, SketchSpec};
use crate::tensor::DenseTensor;
use crate::Matrix;

/// Below this fraction of the leading estimate, changes in the PVE test are
/// rounding noise; the threshold never drops under it.
pub const PVE_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Branch {
    /// Sketch the unfolding of the input tensor for every mode.
    Original,
    /// Sketch the unfolding of the progressively shrunk core.
    Sequential,
}

/// Sketch for the mode-`k` unfolding of `source`. Composite families get one
/// factor per remaining mode, highest mode first, so that their Khatri-Rao
/// row index matches the unfolding's column order.
pub(crate) fn sketch_for_mode(source: &DenseTensor, k: usize, l: usize, cfg: &SolverConfig) -> Result<Matrix> {
    let factor_dims: Vec<usize> = (0..source.order()).rev().filter(|&j| j != k).map(|j| source.dims()[j]).collect();
    let spec = SketchSpec::new(cfg.sketch, derive_seed(cfg.seed, k as u64, cfg.trial)).with_factor_dims(factor_dims);
    draw_sketch(&spec, source.complement_size(k), l)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerOptions {
    pub rank: usize,
    pub schedule: PowerSchedule,
    pub shift: bool,
    /// Orthonormalize the initial sample with `orth` instead of an SVD.
    pub orth_start: bool,
    /// Plain iterations re-orthonormalize with `orth` instead of an SVD.
    pub orth_updates: bool,
}

pub(crate) struct PowerOutcome {
    pub q: Matrix,
    pub trace: ModeTrace,
    pub iterations: usize,
}

/// Range finder with (shifted) power iteration on the Gram operator `A A^T`.
pub(crate) fn power_range(
    a: &Matrix,
    omega: &Matrix,
    mode: usize,
    opts: PowerOptions,
    counters: &mut Counters,
) -> Result<PowerOutcome> {
    let (n, cols) = a.shape();
    if omega.nrows() != cols {
        return Err(TuckerError::DimensionMismatch(format!(
            "sketch has {} rows, unfolding has {cols} columns",
            omega.nrows()
        )));
    }
    counters.product(n, cols, omega.ncols());
    let y = a * omega;
    let mut q = if opts.orth_start {
        orth(&y)
    } else {
        counters.svd(n, y.ncols());
        left_singular(&y)?.0
    };
    if q.ncols() == 0 {
        return Err(TuckerError::Domain(format!("mode {mode}: sketched range is empty")));
    }

    let mut alpha = 0.0;
    let mut records = Vec::new();
    let mut previous: Vec<f64> = Vec::new();
    let mut iterations = 0;
    for j in 1..=opts.schedule.max_iterations() {
        iterations = j;
        let lq = q.ncols();
        counters.product(cols, n, lq);
        let z = a.tr_mul(&q);
        counters.product(n, cols, lq);
        let mut y = a * z;
        if opts.orth_updates && !opts.shift {
            q = orth(&y);
            if q.ncols() == 0 {
                return Err(TuckerError::Domain(format!("mode {mode}: power iterate vanished")));
            }
            continue;
        }
        if opts.shift && alpha != 0.0 {
            y -= &q * alpha;
        }
        counters.svd(n, lq);
        let (u, s) = left_singular(&y)?;
        q = u;
        let sigma_last = s[s.len() - 1];
        records.push(ShiftRecord {
            iteration: j,
            alpha,
            sigma_last,
        });

        if let PowerSchedule::Pve { tol, .. } = opts.schedule {
            let estimates: Vec<f64> = s.iter().map(|x| x + alpha).collect();
            let r = opts.rank;
            let change = (0..r)
                .map(|i| (estimates[i] - previous.get(i).copied().unwrap_or(0.0)).abs())
                .fold(0.0, f64::max);
            let threshold = (tol * estimates[r]).max(PVE_NOISE_FLOOR * estimates[0]);
            if change <= threshold {
                break;
            }
            previous = estimates;
        }

        if opts.shift && sigma_last > alpha && sigma_last >= DEGENERATE_RATIO * s[0] {
            alpha = (sigma_last + alpha) / 2.0;
        }
    }
    Ok(PowerOutcome {
        q,
        trace: ModeTrace {
            mode,
            records,
            final_alpha: alpha,
        },
        iterations,
    })
}

pub(crate) fn run(t: &DenseTensor, cfg: &SolverConfig, branch: Branch, algorithm: Algorithm) -> Result<Solution> {
    cfg.validate(t.dims(), true)?;
    if cfg.shift && cfg.power == PowerSchedule::Fixed(0) {
        return Err(TuckerError::InvalidConfig("the shifted iteration needs q >= 1".into()));
    }
    let order = cfg.processing_order(t.order())?;
    let widths = cfg.sketch_widths();
    let mut counters = Counters::default();
    let mut trace = ShiftTrace::default();
    let mut powers = vec![0; t.order()];
    let mut factors = vec![Matrix::zeros(0, 0); t.order()];
    let mut step_residuals = Vec::new();
    let mut g = t.clone();

    for &k in &order {
        let source = match branch {
            Branch::Original => t,
            Branch::Sequential => &g,
        };
        let a = source.unfold(k)?;
        let omega = sketch_for_mode(source, k, widths[k], cfg)?;
        let opts = PowerOptions {
            rank: cfg.ranks[k],
            schedule: cfg.power,
            shift: cfg.shift,
            orth_start: false,
            orth_updates: false,
        };
        let out = power_range(&a, &omega, k, opts, &mut counters)?;
        let u = out.q.columns(0, cfg.ranks[k]).into_owned();
        counters.contraction(&g, k, cfg.ranks[k]);
        let before = g.frobenius_norm().powi(2);
        g = g.contract(&u, k)?;
        if branch == Branch::Sequential {
            step_residuals.push((before - g.frobenius_norm().powi(2)).max(0.0));
        }
        factors[k] = u;
        powers[k] = out.iterations;
        trace.modes.push(out.trace);
    }

    Ok(Solution {
        algorithm,
        factorization: TuckerFactorization::new(g, factors)?,
        trace,
        powers,
        counters,
        step_residuals,
    })
}

fn require_unshifted(cfg: &SolverConfig) -> Result<()> {
    if cfg.shift {
        return Err(TuckerError::InvalidConfig(
            "the plain randomized solvers run with the shift disabled".into(),
        ));
    }
    Ok(())
}

/// Randomized T-HOSVD: each `U_k` from a sketch of the original `A_(k)`.
pub fn rand_thosvd(t: &DenseTensor, cfg: &SolverConfig) -> Result<TuckerFactorization> {
    require_unshifted(cfg)?;
    Ok(run(t, cfg, Branch::Original, Algorithm::RandThosvd)?.factorization)
}

/// Randomized ST-HOSVD: each `U_k` from a sketch of the shrinking core.
pub fn rand_sthosvd(t: &DenseTensor, cfg: &SolverConfig) -> Result<TuckerFactorization> {
    require_unshifted(cfg)?;
    Ok(run(t, cfg, Branch::Sequential, Algorithm::RandSthosvd)?.factorization)
}

/// Randomized T-HOSVD with the adaptive shift. With `cfg.shift == false` the
/// shift stays at zero and the output equals [`rand_thosvd`].
pub fn shifted_rand_thosvd(t: &DenseTensor, cfg: &SolverConfig) -> Result<(TuckerFactorization, ShiftTrace)> {
    let sol = run(t, cfg, Branch::Original, Algorithm::ShiftedThosvd)?;
    Ok((sol.factorization, sol.trace))
}

/// Randomized ST-HOSVD with the adaptive shift, in `cfg`'s processing order.
pub fn shifted_rand_sthosvd(t: &DenseTensor, cfg: &SolverConfig) -> Result<(TuckerFactorization, ShiftTrace)> {
    let sol = run(t, cfg, Branch::Sequential, Algorithm::ShiftedSthosvd)?;
    Ok((sol.factorization, sol.trace))
}

/// Shifted randomized ST-HOSVD whose per-mode power count is chosen by the PVE
/// test. Returns the realized power counts, indexed by mode.
pub fn pve_shifted_sthosvd(
    t: &DenseTensor,
    cfg: &SolverConfig,
) -> Result<(TuckerFactorization, Vec<usize>, ShiftTrace)> {
    if !matches!(cfg.power, PowerSchedule::Pve { .. }) {
        return Err(TuckerError::InvalidConfig("PVE solver needs a PVE power schedule".into()));
    }
    let sol = run(t, cfg, Branch::Sequential, Algorithm::Pve)?;
    Ok((sol.factorization, sol.powers, sol.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use crate::sketch::{gaussian_matrix, RandomStream};
    use crate::solvers::relative_error;

    fn exact_rank(n: usize, r: usize, seed: u64) -> DenseTensor {
        let mut s = RandomStream::new(seed, 7);
        let mut t = DenseTensor::from_fn(vec![r; 3], |_| s.next_gaussian()).unwrap();
        for k in 0..3 {
            let u = orth(&gaussian_matrix(n, r, seed * 10 + k as u64).unwrap());
            t = t.mode_product(&u, k).unwrap();
        }
        t
    }

    #[test]
    fn exact_rank_recovery_all_branches() {
        let t = exact_rank(12, 3, 1);
        let cfg = SolverConfig::new(vec![3; 3]).with_oversampling(2).with_seed(5);
        let f = rand_thosvd(&t, &cfg).unwrap();
        assert!(relative_error(&t, &f).unwrap() <= 1e-9);
        let f = rand_sthosvd(&t, &cfg).unwrap();
        assert!(relative_error(&t, &f).unwrap() <= 1e-9);
        let shifted = cfg.clone().with_shift(true);
        for (f, trace) in [
            shifted_rand_thosvd(&t, &shifted).unwrap(),
            shifted_rand_sthosvd(&t, &shifted).unwrap(),
        ] {
            assert!(relative_error(&t, &f).unwrap() <= 1e-9);
            assert_eq!(trace.modes.len(), 3);
            for u in &f.factors {
                assert!(orthonormality_defect(u) <= 1e-10);
            }
        }
    }

    #[test]
    fn disabled_shift_reproduces_baseline() {
        let mut s = RandomStream::new(4, 7);
        let t = DenseTensor::from_fn(vec![9, 8, 7], |_| s.next_gaussian()).unwrap();
        let cfg = SolverConfig::new(vec![2, 2, 2]).with_oversampling(2).with_power(3).with_seed(11);
        let base = rand_thosvd(&t, &cfg).unwrap();
        let (same, trace) = shifted_rand_thosvd(&t, &cfg).unwrap();
        assert_eq!(base, same);
        assert!(trace.modes.iter().all(|m| m.records.iter().all(|r| r.alpha == 0.0)));
        let base = rand_sthosvd(&t, &cfg).unwrap();
        assert_eq!(base, shifted_rand_sthosvd(&t, &cfg).unwrap().0);
    }

    #[test]
    fn single_iteration_shift_is_inert() {
        let mut s = RandomStream::new(6, 7);
        let t = DenseTensor::from_fn(vec![9, 8, 7], |_| s.next_gaussian()).unwrap();
        let cfg = SolverConfig::new(vec![2, 2, 2]).with_oversampling(2).with_power(1).with_seed(3);
        let (shifted, trace) = shifted_rand_thosvd(&t, &cfg.clone().with_shift(true)).unwrap();
        assert_eq!(shifted, rand_thosvd(&t, &cfg).unwrap());
        assert!(trace.modes.iter().all(|m| m.final_alpha > 0.0));
    }

    #[test]
    fn shift_trace_is_monotone_and_starts_at_zero() {
        let mut s = RandomStream::new(8, 7);
        let t = DenseTensor::from_fn(vec![10, 10, 10], |_| s.next_gaussian()).unwrap();
        let cfg = SolverConfig::new(vec![3; 3]).with_oversampling(2).with_power(5).with_shift(true);
        let (_, trace) = shifted_rand_sthosvd(&t, &cfg).unwrap();
        for m in &trace.modes {
            assert_eq!(m.records[0].alpha, 0.0);
            assert_eq!(m.records.len(), 5);
            let mut alphas: Vec<f64> = m.records.iter().map(|r| r.alpha).collect();
            alphas.push(m.final_alpha);
            assert!(alphas.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn pve_stops_early_on_exact_rank() {
        let t = exact_rank(15, 3, 2);
        let cfg = SolverConfig::new(vec![3; 3]).with_oversampling(2).with_pve(0.5, 10_000).with_shift(true);
        let (f, q, _) = pve_shifted_sthosvd(&t, &cfg).unwrap();
        assert!(q.iter().all(|&qk| (1..=3).contains(&qk)), "{q:?}");
        assert!(relative_error(&t, &f).unwrap() <= 1e-9);
    }

    #[test]
    fn config_errors() {
        let t = exact_rank(6, 2, 3);
        let too_wide = SolverConfig::new(vec![2; 3]).with_oversampling(5);
        assert!(matches!(rand_thosvd(&t, &too_wide), Err(TuckerError::InvalidConfig(_))));
        let no_power = SolverConfig::new(vec![2; 3]).with_oversampling(1).with_power(0).with_shift(true);
        assert!(matches!(shifted_rand_thosvd(&t, &no_power), Err(TuckerError::InvalidConfig(_))));
        let bad_tol = SolverConfig::new(vec![2; 3]).with_oversampling(1).with_pve(0.0, 5);
        assert!(matches!(pve_shifted_sthosvd(&t, &bad_tol), Err(TuckerError::InvalidConfig(_))));
        let bad_qmax = SolverConfig::new(vec![2; 3]).with_oversampling(1).with_pve(0.5, 0);
        assert!(matches!(pve_shifted_sthosvd(&t, &bad_qmax), Err(TuckerError::InvalidConfig(_))));
        let fixed = SolverConfig::new(vec![2; 3]).with_oversampling(1);
        assert!(matches!(pve_shifted_sthosvd(&t, &fixed), Err(TuckerError::InvalidConfig(_))));
        let shifted = fixed.clone().with_shift(true);
        assert!(matches!(rand_thosvd(&t, &shifted), Err(TuckerError::InvalidConfig(_))));
    }

    #[test]
    fn sketch_rows_follow_the_shrinking_core() {
        let g = DenseTensor::zeros(vec![3, 4, 5]).unwrap();
        let cfg = SolverConfig::new(vec![1; 3]).with_sketch(crate::sketch::SketchFamily::KrGaussian);
        assert_eq!(sketch_for_mode(&g, 1, 2, &cfg).unwrap().shape(), (15, 2));
        assert_eq!(sketch_for_mode(&g, 0, 2, &cfg).unwrap().shape(), (20, 2));
    }
}
