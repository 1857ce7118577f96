//! Holistic randomized ST-HOSVD: compress every mode to `l_k` columns first,
//! then run the deterministic ST-HOSVD on the small core and lift the factors.

use super::hosvd::sthosvd_impl;
use super::randomized::{power_range, sketch_for_mode, PowerOptions};
use super::{Algorithm, Counters, PowerSchedule, ShiftTrace, Solution, SolverConfig, TuckerFactorization};
use crate::error::{Result, TuckerError};
use crate::tensor::DenseTensor;
use crate::Matrix;

pub(crate) fn run(t: &DenseTensor, cfg: &SolverConfig, algorithm: Algorithm) -> Result<Solution> {
    cfg.validate(t.dims(), true)?;
    let q = match cfg.power {
        PowerSchedule::Fixed(q) => q,
        PowerSchedule::Pve { .. } => {
            return Err(TuckerError::InvalidConfig(
                "the holistic solvers take a fixed power count".into(),
            ))
        }
    };
    if cfg.shift && q == 0 {
        return Err(TuckerError::InvalidConfig("the shifted iteration needs q >= 1".into()));
    }
    let order = cfg.processing_order(t.order())?;
    let widths = cfg.sketch_widths();
    let mut counters = Counters::default();
    let mut trace = ShiftTrace::default();
    let mut powers = vec![0; t.order()];
    let mut bases = vec![Matrix::zeros(0, 0); t.order()];
    let mut b = t.clone();

    for &k in &order {
        let a = b.unfold(k)?;
        let omega = sketch_for_mode(&b, k, widths[k], cfg)?;
        let opts = PowerOptions {
            rank: cfg.ranks[k],
            schedule: cfg.power,
            shift: cfg.shift,
            orth_start: true,
            orth_updates: true,
        };
        let out = power_range(&a, &omega, k, opts, &mut counters)?;
        counters.contraction(&b, k, out.q.ncols());
        b = b.contract(&out.q, k)?;
        bases[k] = out.q;
        powers[k] = out.iterations;
        trace.modes.push(out.trace);
    }

    // A rank-deficient sample leaves fewer than r_k basis columns.
    let ranks: Vec<usize> = cfg.ranks.iter().zip(&bases).map(|(&r, q)| r.min(q.ncols())).collect();
    let (inner, _) = sthosvd_impl(&b, &ranks, &order, &mut counters)?;
    let factors = bases
        .iter()
        .zip(&inner.factors)
        .map(|(q, v)| {
            counters.product(q.nrows(), q.ncols(), v.ncols());
            q * v
        })
        .collect();

    Ok(Solution {
        algorithm,
        factorization: TuckerFactorization::new(inner.core, factors)?,
        trace,
        powers,
        counters,
        step_residuals: Vec::new(),
    })
}

/// Holistic randomized ST-HOSVD; `cfg.shift` selects the shifted power scheme.
pub fn holistic_rand_sthosvd(t: &DenseTensor, cfg: &SolverConfig) -> Result<TuckerFactorization> {
    let algorithm = if cfg.shift {
        Algorithm::HolisticShifted
    } else {
        Algorithm::Holistic
    };
    Ok(run(t, cfg, algorithm)?.factorization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orth, orthonormality_defect};
    use crate::sketch::{gaussian_matrix, RandomStream};
    use crate::solvers::relative_error;

    #[test]
    fn exact_rank_both_variants() {
        let mut s = RandomStream::new(1, 7);
        let mut t = DenseTensor::from_fn(vec![3; 3], |_| s.next_gaussian()).unwrap();
        for k in 0..3 {
            t = t.mode_product(&orth(&gaussian_matrix(14, 3, k as u64).unwrap()), k).unwrap();
        }
        for shift in [false, true] {
            let cfg = SolverConfig::new(vec![3; 3]).with_oversampling(3).with_seed(2).with_shift(shift);
            let f = holistic_rand_sthosvd(&t, &cfg).unwrap();
            assert!(relative_error(&t, &f).unwrap() <= 1e-9);
            for u in &f.factors {
                assert!(orthonormality_defect(u) <= 1e-10);
            }
        }
    }

    #[test]
    fn lifted_factors_are_orthonormal_on_full_rank_input() {
        let mut s = RandomStream::new(2, 7);
        let t = DenseTensor::from_fn(vec![10, 9, 8], |_| s.next_gaussian()).unwrap();
        for shift in [false, true] {
            let cfg = SolverConfig::new(vec![2, 3, 2]).with_oversampling(2).with_power(2).with_shift(shift);
            let f = holistic_rand_sthosvd(&t, &cfg).unwrap();
            assert_eq!(f.ranks(), &[2, 3, 2]);
            for u in &f.factors {
                assert!(orthonormality_defect(u) <= 1e-10);
            }
        }
    }

    #[test]
    fn rejects_pve_schedule() {
        let t = DenseTensor::from_fn(vec![6; 3], |i| i[0] as f64 + 1.0).unwrap();
        let cfg = SolverConfig::new(vec![1; 3]).with_oversampling(1).with_pve(0.5, 10);
        assert!(matches!(holistic_rand_sthosvd(&t, &cfg), Err(TuckerError::InvalidConfig(_))));
    }
}
