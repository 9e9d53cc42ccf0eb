//! Sparse preconditioning toolkit: IC(0) factors, gradient descent on the
//! unweighted and `A⁻¹`-weighted Frobenius objectives, preconditioned CG, and
//! the dense spectral diagnostics used to compare them.
//!
//! The linear-algebra kernels are generic over [`Real`] (`f32` or `f64`); the
//! experiment pipeline (problem generation, training) runs in `f64`, and the
//! aliases below name the `f64` instantiations.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ic0;
pub mod objective;
pub mod problem;
pub mod random;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use ic0::ic0_factorize;
pub use objective::{
    exact_objective, loss_gradient_probe, loss_probe, train, LossKind, TrainConfig, TrainReport,
};
pub use problem::{
    assemble_fvm, attach_solutions, gaussian_random_field, sample_probes, CoefficientField,
    GridSpec, ProbeSet,
};
pub use scalar::Real;
pub use solver::{pcg, PcgOutcome};
pub use sparse::{frob_norm_sq, CsrMatrix, DenseMatrix, FrobeniusNorm, LowerFactor};
pub use spectral::{
    condition_number, eigen_histogram, mode_energies, precond_spectrum, sym_eig, sym_eigvals,
    sym_eigvals_tridiagonal, theorem_bound, verify_lemma, EigenPair, Histogram, HistogramScale,
    LemmaCheck, ModeEnergies, TheoremBound,
};

pub type Csr = CsrMatrix<f64>;
pub type Factor = LowerFactor<f64>;
pub type Dense = DenseMatrix<f64>;
pub type Eigen = EigenPair<f64>;
pub type Csr32 = CsrMatrix<f32>;
pub type Factor32 = LowerFactor<f32>;
pub type Dense32 = DenseMatrix<f32>;
