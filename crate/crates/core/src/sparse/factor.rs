use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::sparse::csr::check_structure;
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Sparse lower-triangular factor `L` of a preconditioner `P = L Lᵀ`.
///
/// Stored row-wise like [`CsrMatrix`], restricted to the lower triangle, with
/// the diagonal present in every row (and therefore last in its row). The
/// pattern is frozen at construction; only values can change afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerFactor<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> LowerFactor<T> {
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Result<Self> {
        check_structure(n, &row_ptr, &col_idx)?;
        check_len(col_idx.len(), values.len())?;
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.last() != Some(&i) {
                return Err(Error::InvalidStructure(format!(
                    "row {i} of a lower factor must end with its diagonal entry"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Lower triangle (diagonal included) of a square sparse matrix, values kept.
    pub fn from_lower_triangle(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(n, row_ptr, col_idx, values)
    }

    /// Lower triangle of a dense matrix, keeping entries that are not exactly zero
    /// plus the whole diagonal.
    pub fn from_dense(m: &DenseMatrix<T>) -> Result<Self> {
        check_len(m.rows(), m.cols())?;
        let n = m.rows();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                let v = m[(i, j)];
                if j == i || v != T::zero() {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(n, row_ptr, col_idx, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Mutable entry values; the pattern stays fixed.
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Position of the diagonal entry of row `i` in [`values`](Self::values).
    #[inline]
    pub fn diag_pos(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - 1
    }

    #[inline]
    pub fn diag(&self, i: usize) -> T {
        self.values[self.diag_pos(i)]
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        check_len(self.nnz(), values.len())?;
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn to_csr(&self) -> CsrMatrix<T> {
        CsrMatrix::new(
            self.n,
            self.row_ptr.clone(),
            self.col_idx.clone(),
            self.values.clone(),
        )
        .expect("lower factor pattern is valid CSR")
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        self.to_csr().to_dense()
    }

    fn check_diagonal(&self) -> Result<()> {
        for i in 0..self.n {
            let d = self.diag(i);
            if !(d > T::zero()) {
                return Err(Error::Breakdown {
                    row: i,
                    pivot: d.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// `L x`.
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y)?;
        Ok(y)
    }

    pub(crate) fn mul_vec_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols
                .iter()
                .zip(vals)
                .fold(T::zero(), |acc, (&j, &v)| acc + v * x[j]);
        }
        Ok(())
    }

    /// `Lᵀ x`, scattering row by row.
    pub fn mul_transpose_vec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.n];
        self.mul_transpose_vec_into(x, &mut y)?;
        Ok(y)
    }

    pub(crate) fn mul_transpose_vec_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        y.fill(T::zero());
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] = y[j] + v * xi;
            }
        }
        Ok(())
    }

    /// Forward substitution: returns `y` with `L y = b`.
    pub fn lower_solve(&self, b: &[T]) -> Result<Vec<T>> {
        let mut y = b.to_vec();
        self.lower_solve_in_place(&mut y)?;
        Ok(y)
    }

    pub fn lower_solve_in_place(&self, y: &mut [T]) -> Result<()> {
        check_len(self.n, y.len())?;
        self.check_diagonal()?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let last = cols.len() - 1;
            let s = cols[..last]
                .iter()
                .zip(&vals[..last])
                .fold(T::zero(), |acc, (&j, &v)| acc + v * y[j]);
            y[i] = (y[i] - s) / vals[last];
        }
        Ok(())
    }

    /// Backward substitution: returns `y` with `Lᵀ y = b`.
    pub fn upper_solve(&self, b: &[T]) -> Result<Vec<T>> {
        let mut y = b.to_vec();
        self.upper_solve_in_place(&mut y)?;
        Ok(y)
    }

    pub fn upper_solve_in_place(&self, y: &mut [T]) -> Result<()> {
        check_len(self.n, y.len())?;
        self.check_diagonal()?;
        for i in (0..self.n).rev() {
            let (cols, vals) = self.row(i);
            let last = cols.len() - 1;
            let yi = y[i] / vals[last];
            y[i] = yi;
            for (&j, &v) in cols[..last].iter().zip(&vals[..last]) {
                y[j] = y[j] - v * yi;
            }
        }
        Ok(())
    }

    /// `P⁻¹ r = L⁻ᵀ L⁻¹ r`.
    pub fn apply_inverse(&self, r: &[T]) -> Result<Vec<T>> {
        let mut z = r.to_vec();
        self.lower_solve_in_place(&mut z)?;
        self.upper_solve_in_place(&mut z)?;
        Ok(z)
    }

    /// Materializes `P = L Lᵀ` on its symbolic product pattern.
    ///
    /// Entry `(i, j)` is the dot product of rows `i` and `j` of `L`, summed in
    /// ascending column order, so the result is exactly symmetric.
    pub fn product(&self) -> CsrMatrix<T> {
        let n = self.n;
        // rows_in_col[k] = rows i with L_ik stored
        let mut rows_in_col: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for &k in self.row(i).0 {
                rows_in_col[k].push(i);
            }
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut mark = vec![usize::MAX; n];
        let mut pattern = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            pattern.clear();
            for &k in self.row(i).0 {
                for &j in &rows_in_col[k] {
                    if mark[j] != i {
                        mark[j] = i;
                        pattern.push(j);
                    }
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_idx.push(j);
                values.push(self.row_dot(i, j));
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::new(n, row_ptr, col_idx, values).expect("product pattern is valid CSR")
    }

    /// Sparse dot product of rows `i` and `j` (merge over ascending columns).
    fn row_dot(&self, i: usize, j: usize) -> T {
        let (ci, vi) = self.row(i);
        let (cj, vj) = self.row(j);
        let (mut p, mut q) = (0, 0);
        let mut acc = T::zero();
        while p < ci.len() && q < cj.len() {
            match ci[p].cmp(&cj[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc = acc + vi[p] * vj[q];
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }
}
