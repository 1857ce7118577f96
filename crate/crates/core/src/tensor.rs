//! Dense d-way tensors and the multilinear primitives the solvers are built on.
//!
//! Storage is column-major in the generalized sense: the mode-0 index varies
//! fastest. The mode-`k` unfolding is the `n_k x prod_{j != k} n_j` matrix whose
//! columns enumerate the remaining modes with the lowest remaining mode varying
//! fastest. With this layout every unfolding, fold and mode product reduces to
//! contiguous `left x n_k` slabs, where `left = prod_{j<k} n_j`.

use nalgebra::{DMatrixView, DMatrixViewMut};

use crate::error::{Result, TuckerError};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let len = checked_product(&dims)?;
        if data.len() != len {
            return Err(TuckerError::Shape(format!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                len
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        validate_dims(&dims)?;
        let len = checked_product(&dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; t.dims.len()];
        for value in t.data.iter_mut() {
            *value = f(&idx);
            for (i, n) in idx.iter_mut().zip(&t.dims) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dims.len() {
            return Err(TuckerError::DimensionMismatch(format!(
                "index has {} entries, tensor has {} modes",
                index.len(),
                self.dims.len()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            if i >= n {
                return Err(TuckerError::Shape(format!("index {index:?} outside dims {:?}", self.dims)));
            }
            offset += i * stride;
            stride *= n;
        }
        Ok(offset)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.linear_index(index)?])
    }

    /// Product of all dimensions except mode `k`.
    pub fn complement_size(&self, k: usize) -> usize {
        self.dims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &n)| n)
            .product()
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.dims.len() {
            return Err(TuckerError::ModeOutOfRange {
                mode: k,
                order: self.dims.len(),
            });
        }
        Ok(())
    }

    /// `(prod_{j<k} n_j, n_k, prod_{j>k} n_j)`
    fn split(&self, k: usize) -> (usize, usize, usize) {
        split_dims(&self.dims, k)
    }

    /// Mode-`k` unfolding `A_(k)`.
    pub fn unfold(&self, k: usize) -> Result<Matrix> {
        self.check_mode(k)?;
        let (left, nk, right) = self.split(k);
        if left == 1 {
            return Ok(Matrix::from_column_slice(nk, right, &self.data));
        }
        let mut out = vec![0.0; self.data.len()];
        for r in 0..right {
            for ik in 0..nk {
                let src = &self.data[left * (ik + nk * r)..left * (ik + nk * r + 1)];
                let base = ik + nk * left * r;
                for (il, &v) in src.iter().enumerate() {
                    out[base + nk * il] = v;
                }
            }
        }
        Ok(Matrix::from_vec(nk, left * right, out))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, k: usize, dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        if k >= dims.len() {
            return Err(TuckerError::ModeOutOfRange {
                mode: k,
                order: dims.len(),
            });
        }
        let (left, nk, right) = split_dims(dims, k);
        if m.nrows() != nk || m.ncols() != left * right {
            return Err(TuckerError::Shape(format!(
                "cannot fold a {}x{} matrix along mode {k} into dims {dims:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        let src = m.as_slice();
        if left == 1 {
            return Self::new(dims.to_vec(), src.to_vec());
        }
        let mut data = vec![0.0; src.len()];
        for r in 0..right {
            for ik in 0..nk {
                let dst = &mut data[left * (ik + nk * r)..left * (ik + nk * r + 1)];
                let base = ik + nk * left * r;
                for (il, v) in dst.iter_mut().enumerate() {
                    *v = src[base + nk * il];
                }
            }
        }
        Self::new(dims.to_vec(), data)
    }

    /// Mode-`k` product `self x_k b`, with `b` of shape `m x n_k`.
    pub fn mode_product(&self, b: &Matrix, k: usize) -> Result<Self> {
        self.check_mode(k)?;
        let (left, nk, right) = self.split(k);
        if b.ncols() != nk {
            return Err(TuckerError::DimensionMismatch(format!(
                "mode-{k} product needs {nk} columns, matrix is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let m = b.nrows();
        let mut dims = self.dims.clone();
        dims[k] = m;
        if m == 0 {
            return Err(TuckerError::Shape("mode product with an empty matrix".into()));
        }
        let mut out = vec![0.0; left * m * right];
        if left == 1 {
            let x = DMatrixView::from_slice(&self.data, nk, right);
            let mut y = DMatrixViewMut::from_slice(&mut out, m, right);
            y.gemm(1.0, b, &x, 0.0);
        } else {
            let bt = b.transpose();
            let slab_in = left * nk;
            let slab_out = left * m;
            for (xs, ys) in self.data.chunks_exact(slab_in).zip(out.chunks_exact_mut(slab_out)) {
                let x = DMatrixView::from_slice(xs, left, nk);
                let mut y = DMatrixViewMut::from_slice(ys, left, m);
                y.gemm(1.0, &x, &bt, 0.0);
            }
        }
        Ok(Self { dims, data: out })
    }

    /// `self x_k u^T`, the contraction used to shrink a core.
    pub fn contract(&self, u: &Matrix, k: usize) -> Result<Self> {
        self.mode_product(&u.transpose(), k)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(TuckerError::DimensionMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// Diagonal tensor with `v[i]` at `(i, i, ..., i)`.
pub fn tendiag(v: &[f64], dims: &[usize]) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(dims.to_vec())?;
    let min_dim = *dims.iter().min().expect("validated non-empty");
    if v.len() > min_dim {
        return Err(TuckerError::Shape(format!(
            "diagonal of length {} does not fit dims {dims:?}",
            v.len()
        )));
    }
    let diagonal_stride: usize = (0..dims.len()).map(|k| dims[..k].iter().product::<usize>()).sum();
    for (i, &x) in v.iter().enumerate() {
        t.data[i * diagonal_stride] = x;
    }
    Ok(t)
}

pub(crate) fn split_dims(dims: &[usize], k: usize) -> (usize, usize, usize) {
    let left = dims[..k].iter().product();
    let right = dims[k + 1..].iter().product();
    (left, dims[k], right)
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(TuckerError::Shape("a tensor needs at least one mode".into()));
    }
    if dims.contains(&0) {
        return Err(TuckerError::Shape(format!("zero-length mode in dims {dims:?}")));
    }
    Ok(())
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| TuckerError::Shape(format!("dims {dims:?} overflow usize")))
}
