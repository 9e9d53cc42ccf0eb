//! Sparse and dense linear-algebra kernels shared by the rest of the crate.
//!
//! Every kernel accumulates in ascending index order, so results are
//! bit-reproducible across runs and thread counts.

mod csr;
mod dense;
mod factor;
pub mod mtx;

pub use csr::CsrMatrix;
pub use dense::{cholesky_solve, DenseMatrix};
pub use factor::LowerFactor;

use crate::scalar::Real;

/// Squared Frobenius norm, the sum of squared entries.
pub trait FrobeniusNorm<T> {
    fn frob_norm_sq(&self) -> T;
}

impl<T: Real> FrobeniusNorm<T> for CsrMatrix<T> {
    fn frob_norm_sq(&self) -> T {
        self.values().iter().fold(T::zero(), |acc, &v| acc + v * v)
    }
}

impl<T: Real> FrobeniusNorm<T> for DenseMatrix<T> {
    fn frob_norm_sq(&self) -> T {
        self.as_slice()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
    }
}

impl<T: Real> FrobeniusNorm<T> for LowerFactor<T> {
    fn frob_norm_sq(&self) -> T {
        self.values().iter().fold(T::zero(), |acc, &v| acc + v * v)
    }
}

pub fn frob_norm_sq<T: Real>(m: &impl FrobeniusNorm<T>) -> T {
    m.frob_norm_sq()
}
