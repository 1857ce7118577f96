use super::{
    project_core, validate_order, validate_ranks, Algorithm, Counters, ShiftTrace, Solution, SolverConfig,
    TuckerFactorization,
};
use crate::error::Result;
use crate::linalg::{left_singular, orth};
use crate::tensor::DenseTensor;
use crate::Matrix;

fn leading_left_vectors(m: &Matrix, r: usize, counters: &mut Counters) -> Result<Matrix> {
    counters.svd(m.nrows(), m.ncols());
    let (u, _) = left_singular(m)?;
    if u.ncols() >= r {
        return Ok(u.columns(0, r).into_owned());
    }
    // Fewer columns than r: complete with an orthonormal complement.
    let n = m.nrows();
    let mut padded = Matrix::zeros(n, u.ncols() + n);
    padded.columns_mut(0, u.ncols()).copy_from(&u);
    padded.columns_mut(u.ncols(), n).fill_with_identity();
    Ok(orth(&padded).columns(0, r).into_owned())
}

/// Truncated HOSVD: `U_k` holds the leading `r_k` left singular vectors of `A_(k)`.
pub fn thosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerFactorization> {
    let order: Vec<usize> = (0..t.order()).collect();
    thosvd_impl(t, ranks, &order, &mut Counters::default())
}

fn thosvd_impl(t: &DenseTensor, ranks: &[usize], order: &[usize], counters: &mut Counters) -> Result<TuckerFactorization> {
    validate_ranks(ranks, t.dims())?;
    let factors = (0..t.order())
        .map(|k| leading_left_vectors(&t.unfold(k)?, ranks[k], counters))
        .collect::<Result<Vec<_>>>()?;
    let mut g = t.clone();
    for &k in order {
        counters.contraction(&g, k, ranks[k]);
        g = g.contract(&factors[k], k)?;
    }
    TuckerFactorization::new(g, factors)
}

/// Sequentially truncated HOSVD in the given (0-based) processing order.
pub fn sthosvd(t: &DenseTensor, ranks: &[usize], order: &[usize]) -> Result<TuckerFactorization> {
    Ok(sthosvd_impl(t, ranks, order, &mut Counters::default())?.0)
}

pub(crate) fn sthosvd_impl(
    t: &DenseTensor,
    ranks: &[usize],
    order: &[usize],
    counters: &mut Counters,
) -> Result<(TuckerFactorization, Vec<f64>)> {
    validate_ranks(ranks, t.dims())?;
    validate_order(order, t.order())?;
    let mut factors = vec![Matrix::zeros(0, 0); t.order()];
    let mut residuals = Vec::with_capacity(order.len());
    let mut g = t.clone();
    for &k in order {
        let u = leading_left_vectors(&g.unfold(k)?, ranks[k], counters)?;
        counters.contraction(&g, k, ranks[k]);
        let before = g.frobenius_norm().powi(2);
        g = g.contract(&u, k)?;
        residuals.push((before - g.frobenius_norm().powi(2)).max(0.0));
        factors[k] = u;
    }
    Ok((TuckerFactorization::new(g, factors)?, residuals))
}

pub(crate) fn thosvd_solution(t: &DenseTensor, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate(t.dims(), false)?;
    let order = cfg.processing_order(t.order())?;
    let mut counters = Counters::default();
    let factorization = thosvd_impl(t, &cfg.ranks, &order, &mut counters)?;
    Ok(Solution {
        algorithm: Algorithm::Thosvd,
        factorization,
        trace: ShiftTrace::default(),
        powers: vec![0; t.order()],
        counters,
        step_residuals: Vec::new(),
    })
}

pub(crate) fn sthosvd_solution(t: &DenseTensor, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate(t.dims(), false)?;
    let order = cfg.processing_order(t.order())?;
    let mut counters = Counters::default();
    let (factorization, step_residuals) = sthosvd_impl(t, &cfg.ranks, &order, &mut counters)?;
    debug_assert_eq!(project_core(t, &factorization.factors, &order)?.dims(), factorization.core.dims());
    Ok(Solution {
        algorithm: Algorithm::Sthosvd,
        factorization,
        trace: ShiftTrace::default(),
        powers: vec![0; t.order()],
        counters,
        step_residuals,
    })
}
