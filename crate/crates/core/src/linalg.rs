//! Dense matrix kernels: economy SVD, Gram-Schmidt orthonormalization,
//! truncated SVD and tail energies.

use nalgebra::DVector;

use crate::error::{Result, TuckerError};
use crate::Matrix;

/// Thin SVD `M = U diag(s) V^T` with `p = min(rows, cols)` triplets.
#[derive(Debug, Clone)]
pub struct EconSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl EconSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.transpose()
    }
}

fn raw_svd(m: Matrix) -> Result<EconSvd> {
    let a = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = a.thin_svd().map_err(|_| TuckerError::SvdFailed)?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Ok(EconSvd {
        u: Matrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s: (0..s.nrows()).map(|i| s[i]).collect(),
        v: Matrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

/// Economy SVD with descending singular values.
///
/// Strongly rectangular inputs are reduced by a QR factorization first; the
/// SVD then runs on the small triangular factor.
/// Each left singular vector is signed so that its largest-magnitude entry is
/// positive (the matching right vector is flipped with it).
pub fn econ_svd(m: &Matrix) -> Result<EconSvd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(TuckerError::NonFinite);
    }
    if m.is_empty() {
        return Err(TuckerError::Shape(format!("empty {}x{} matrix", m.nrows(), m.ncols())));
    }
    let (rows, cols) = m.shape();
    let mut out = if rows > 2 * cols {
        let qr = m.clone().qr();
        let inner = raw_svd(qr.r())?;
        EconSvd {
            u: qr.q() * inner.u,
            s: inner.s,
            v: inner.v,
        }
    } else if cols > 2 * rows {
        let qr = m.transpose().qr();
        let inner = raw_svd(qr.r().transpose())?;
        EconSvd {
            u: inner.u,
            s: inner.s,
            v: qr.q() * inner.v,
        }
    } else {
        raw_svd(m.clone())?
    };
    sort_descending(&mut out);
    fix_signs(&mut out);
    Ok(out)
}

fn sort_descending(svd: &mut EconSvd) {
    let p = svd.s.len();
    let mut perm: Vec<usize> = (0..p).collect();
    perm.sort_by(|&a, &b| svd.s[b].total_cmp(&svd.s[a]));
    if perm.iter().enumerate().all(|(i, &j)| i == j) {
        return;
    }
    svd.s = perm.iter().map(|&j| svd.s[j]).collect();
    svd.u = Matrix::from_columns(&perm.iter().map(|&j| svd.u.column(j)).collect::<Vec<_>>());
    svd.v = Matrix::from_columns(&perm.iter().map(|&j| svd.v.column(j)).collect::<Vec<_>>());
}

fn fix_signs(svd: &mut EconSvd) {
    for j in 0..svd.s.len() {
        let col = svd.u.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            svd.u.column_mut(j).neg_mut();
            svd.v.column_mut(j).neg_mut();
        }
    }
}

/// Left singular vectors and singular values only, descending, with the same
/// sign convention as [`econ_svd`]. Wide inputs skip forming the large
/// orthogonal factor of the preconditioning QR.
pub fn left_singular(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (rows, cols) = m.shape();
    if cols > 2 * rows && m.iter().all(|x| x.is_finite()) && rows > 0 {
        let r = m.transpose().qr().r();
        let svd = econ_svd(&r.transpose())?;
        return Ok((svd.u, svd.s));
    }
    let svd = econ_svd(m)?;
    Ok((svd.u, svd.s))
}

/// Orthonormal basis for the range of `m` by classical Gram-Schmidt with
/// reorthogonalization. A column whose residual falls below `1e-12` times the
/// largest column norm is dropped, so a rank-deficient input yields fewer columns.
pub fn orth(m: &Matrix) -> Matrix {
    let rows = m.nrows();
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m.ncols().min(rows));
    if scale == 0.0 || !scale.is_finite() {
        return Matrix::zeros(rows, 0);
    }
    for c in m.column_iter() {
        if basis.len() == rows {
            break;
        }
        let mut v = c.clone_owned();
        for _ in 0..2 {
            for q in &basis {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / norm);
        }
    }
    Matrix::from_columns(&basis)
}

/// Leading `r` singular triplets `(U_r, s_r, V_r)`.
pub fn truncated_svd(m: &Matrix, r: usize) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let p = m.nrows().min(m.ncols());
    if r == 0 || r > p {
        return Err(TuckerError::InvalidRank(format!("rank {r} outside 1..={p}")));
    }
    let svd = econ_svd(m)?;
    Ok((
        svd.u.columns(0, r).into_owned(),
        svd.s[..r].to_vec(),
        svd.v.columns(0, r).into_owned(),
    ))
}

/// `sqrt(sum_{i > r} s_i^2)` over a descending spectrum.
pub fn tail_energy(s: &[f64], r: usize) -> f64 {
    s.iter().skip(r).map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest deviation of `Q^T Q` from the identity, in Frobenius norm.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    (q.transpose() * q - Matrix::identity(q.ncols(), q.ncols())).norm()
}
