//! Incomplete Cholesky factorization with zero fill-in.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, LowerFactor};

/// IC(0) factor of a symmetric matrix with positive diagonal.
///
/// Up-looking, row by row. For each stored `j < i` in row `i`,
///
/// ```text
/// L_ij = (A_ij - Σ_{k<j} L_ik L_jk) / L_jj
/// L_ii = sqrt(A_ii - Σ_{k<i} L_ik²)
/// ```
///
/// where the sums only run over columns present in both rows of `L`. The
/// pattern of `L` is exactly the lower triangle of the pattern of `A`, and
/// `(L Lᵀ)_ij = A_ij` on that pattern. A non-positive pivot is reported as
/// [`Error::Breakdown`]; no diagonal shift is attempted.
pub fn ic0_factorize<T: Real>(a: &CsrMatrix<T>) -> Result<LowerFactor<T>> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    for i in 0..a.n() {
        match a.get(i, i) {
            Some(d) if d > T::zero() => {}
            Some(d) => {
                return Err(Error::Breakdown {
                    row: i,
                    pivot: d.as_f64(),
                })
            }
            None => {
                return Err(Error::InvalidStructure(format!(
                    "row {i} has no diagonal entry"
                )))
            }
        }
    }

    let mut l = LowerFactor::from_lower_triangle(a)?;
    let n = l.n();
    let row_ptr = l.row_ptr().to_vec();
    let col_idx = l.col_idx().to_vec();
    let vals = l.values_mut();

    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        for p in start..end - 1 {
            let j = col_idx[p];
            // merge rows i and j over columns k < j
            let (mut pi, mut pj) = (start, row_ptr[j]);
            let jdiag = row_ptr[j + 1] - 1;
            let mut s = T::zero();
            while pi < p && pj < jdiag {
                let (ki, kj) = (col_idx[pi], col_idx[pj]);
                if ki < kj {
                    pi += 1;
                } else if kj < ki {
                    pj += 1;
                } else {
                    s = s + vals[pi] * vals[pj];
                    pi += 1;
                    pj += 1;
                }
            }
            vals[p] = (vals[p] - s) / vals[jdiag];
        }
        let d = end - 1;
        let s = vals[start..d].iter().fold(T::zero(), |acc, &v| acc + v * v);
        let pivot = vals[d] - s;
        if !(pivot > T::zero()) {
            return Err(Error::Breakdown {
                row: i,
                pivot: pivot.as_f64(),
            });
        }
        vals[d] = pivot.sqrt();
    }
    Ok(l)
}
