#![allow(dead_code)]

use proptest::prelude::*;
use tucker_core::sketch::RandomStream;
use tucker_core::{gaussian_matrix, orth, DenseTensor, Matrix};

pub fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut s = RandomStream::new(seed, 77);
    DenseTensor::from_fn(dims.to_vec(), |_| s.next_gaussian()).unwrap()
}

pub fn exact_rank(dims: &[usize], ranks: &[usize], seed: u64) -> DenseTensor {
    let mut t = random_tensor(ranks, seed);
    for (k, (&n, &r)) in dims.iter().zip(ranks).enumerate() {
        let u = orth(&gaussian_matrix(n, r, seed.wrapping_add(101 + k as u64)).unwrap());
        t = t.mode_product(&u, k).unwrap();
    }
    t
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Orthogonal projector onto the column span of an orthonormal `q`.
pub fn projector(q: &Matrix) -> Matrix {
    q * q.transpose()
}

/// Dimensions of order 2..=4, each in 1..=max.
pub fn dims_strategy(max: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max, 2..=4)
}
