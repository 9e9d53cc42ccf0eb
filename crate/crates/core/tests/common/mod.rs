//! Test fixtures and dense oracles. Nothing here calls into the code under
//! test beyond constructors and plain dense arithmetic.

#![allow(dead_code)]

use frobprec::random::NormalStream;
use frobprec::{CsrMatrix, DenseMatrix, LowerFactor};

pub fn gaussian_matrix(rows: usize, cols: usize, s: &mut NormalStream) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| s.next_normal())
}

/// Orthonormal matrix by modified Gram–Schmidt on Gaussian columns.
pub fn random_orthonormal(n: usize, s: &mut NormalStream) -> DenseMatrix<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| s.vector(n)).collect();
    for j in 0..n {
        for k in 0..j {
            let proj: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
            for i in 0..n {
                cols[j][i] -= proj * cols[k][i];
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    DenseMatrix::from_columns(&cols).unwrap()
}

/// `Q diag(λ) Qᵀ`.
pub fn compose(q: &DenseMatrix<f64>, lambda: &[f64]) -> DenseMatrix<f64> {
    let n = lambda.len();
    let ql = DenseMatrix::from_fn(n, n, |i, j| q[(i, j)] * lambda[j]);
    let a = ql.matmul(&q.transpose()).unwrap();
    // exact symmetry
    DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_spd(n: usize, lo: f64, hi: f64, s: &mut NormalStream) -> DenseMatrix<f64> {
    let q = random_orthonormal(n, s);
    let lambda: Vec<f64> = (0..n).map(|_| s.uniform(lo, hi)).collect();
    compose(&q, &lambda)
}

/// Random lower-triangular factor: diagonal in `[0.5, 2]`, each strictly lower
/// entry present with probability `density`, values in `[-0.5, 0.5]`.
pub fn random_lower(n: usize, density: f64, s: &mut NormalStream) -> LowerFactor<f64> {
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if s.uniform(0.0, 1.0) < density {
                col_idx.push(j);
                values.push(s.uniform(-0.5, 0.5));
            }
        }
        col_idx.push(i);
        values.push(s.uniform(0.5, 2.0));
        row_ptr.push(col_idx.len());
    }
    LowerFactor::new(n, row_ptr, col_idx, values).unwrap()
}

/// Lower triangle of the 5-point stencil on an `nx × ny` grid with random
/// values (diagonal in `[0.5, 2]`, off-diagonals in `[-0.5, 0.5]`).
pub fn five_point_factor(nx: usize, ny: usize, s: &mut NormalStream) -> LowerFactor<f64> {
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let c = iy * nx + ix;
            if iy > 0 {
                col_idx.push(c - nx);
                values.push(s.uniform(-0.5, 0.5));
            }
            if ix > 0 {
                col_idx.push(c - 1);
                values.push(s.uniform(-0.5, 0.5));
            }
            col_idx.push(c);
            values.push(s.uniform(0.5, 2.0));
            row_ptr.push(col_idx.len());
        }
    }
    LowerFactor::new(nx * ny, row_ptr, col_idx, values).unwrap()
}

/// Plain triple-loop dense product, independent of `DenseMatrix::matmul`.
pub fn naive_matmul(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
    })
}

pub fn dense_of(a: &CsrMatrix<f64>) -> DenseMatrix<f64> {
    let n = a.n();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for p in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            d[(i, a.col_idx()[p])] = a.values()[p];
        }
    }
    d
}

pub fn max_abs_diff(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Textbook dense Cholesky–Banachiewicz, `A = C Cᵀ`.
pub fn naive_cholesky(a: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let n = a.rows();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| c[(i, k)] * c[(j, k)]).sum();
            c[(i, j)] = if i == j {
                (a[(i, i)] - s).sqrt()
            } else {
                (a[(i, j)] - s) / c[(j, j)]
            };
        }
    }
    c
}

pub fn frob(a: &DenseMatrix<f64>) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}
