//! Preconditioned conjugate gradient.

use crate::error::{check_len, Error, Result};
use crate::scalar::{dot, norm2, Real};
use crate::sparse::{CsrMatrix, LowerFactor};

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Result of a converged [`pcg`] run.
#[derive(Clone, Debug, PartialEq)]
pub struct PcgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True relative residual `‖b − A x_k‖ / ‖b‖` for `k = 0..=iterations`.
    pub residual_history: Vec<T>,
    /// Energy functional `½ x_kᵀ A x_k − bᵀ x_k`; non-increasing in exact arithmetic.
    pub energy_history: Vec<T>,
}

/// Solves `A x = b` by CG from `x₀ = 0`, preconditioned with `P = L Lᵀ` when a
/// factor is given.
///
/// Stops once the true residual, recomputed every iteration, satisfies
/// `‖b − A x‖ / ‖b‖ ≤ rel_tol`. Running out of iterations yields
/// [`Error::NotConverged`] carrying the residual history so far.
pub fn pcg<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    factor: Option<&LowerFactor<T>>,
    rel_tol: T,
    max_iter: usize,
) -> Result<PcgOutcome<T>> {
    let n = a.n();
    check_len(n, b.len())?;
    if let Some(l) = factor {
        check_len(n, l.n())?;
    }
    if !(rel_tol > T::zero() && rel_tol < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must lie in (0, 1), got {rel_tol}"
        )));
    }
    let precondition = |r: &[T]| -> Result<Vec<T>> {
        match factor {
            Some(l) => l.apply_inverse(r),
            None => Ok(r.to_vec()),
        }
    };

    let b_norm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut residual_history = vec![T::one()];
    let mut energy_history = vec![T::zero()];
    if b_norm == T::zero() {
        residual_history[0] = T::zero();
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            residual_history,
            energy_history,
        });
    }

    let mut r = b.to_vec();
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut ax = vec![T::zero(); n];
    let half = T::lit(0.5);

    for k in 1..=max_iter {
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        let alpha = rz / pap;
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("CG step length at iteration {k}")));
        }
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }

        a.spmv_into(&x, &mut ax)?;
        let true_res: Vec<T> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
        let rel = norm2(&true_res) / b_norm;
        if !rel.is_finite() {
            return Err(Error::NonFinite(format!("CG residual at iteration {k}")));
        }
        residual_history.push(rel);
        let energy = half * dot(&x, &ax) - dot(b, &x);
        energy_history.push(energy);
        if rel <= rel_tol {
            return Ok(PcgOutcome {
                x,
                iterations: k,
                residual_history,
                energy_history,
            });
        }

        z = precondition(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: residual_history.last().map_or(f64::NAN, |r| r.as_f64()),
        history: residual_history.iter().map(|r| r.as_f64()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let out = pcg(&a, &b, None, 1e-10, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
        assert_eq!(out.residual_history.len(), 2);
    }

    #[test]
    fn zero_rhs_is_solved_immediately() {
        let a = CsrMatrix::<f64>::identity(3);
        let out = pcg(&a, &[0.0; 3], None, 1e-8, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 3]);
    }

    #[test]
    fn max_iter_error_carries_history() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        match pcg(&a, &[1.0, 1.0, 1.0], None, 1e-12, 1) {
            Err(Error::NotConverged {
                iterations,
                history,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let a = CsrMatrix::<f64>::identity(2);
        assert!(pcg(&a, &[1.0, 1.0], None, 0.0, 5).is_err());
        assert!(pcg(&a, &[1.0, 1.0], None, 1.0, 5).is_err());
    }
}
