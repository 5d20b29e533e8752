//! Shared fixtures for the criterion benchmarks.

use nalgebra::DMatrix;
use qmee::rng::seeded;
use qmee::ErrorVector;
use rand_distr::{Distribution, StandardNormal};

/// `n` standard normal errors from a fixed stream.
pub fn normal_errors(n: usize, seed: u64) -> ErrorVector {
    let mut rng = seeded(seed);
    ErrorVector::new((0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).expect("finite draws")
}

/// `rows x cols` standard normal matrix from a fixed stream.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}
