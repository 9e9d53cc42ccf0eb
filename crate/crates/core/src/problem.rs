//! Test problem: a cell-centered finite-volume discretization of
//! `-div(k grad u) = f` on the unit square with Dirichlet boundaries, where
//! `k` is the exponential of a smoothed Gaussian random field, plus batches
//! of standard-normal right-hand sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::NormalStream;
use crate::solver::pcg;
use crate::sparse::{cholesky_solve, CsrMatrix};

/// Largest dimension solved densely in [`attach_solutions`].
pub const DENSE_SOLVE_LIMIT: usize = 4096;

/// Residual bound every attached solution must satisfy.
pub const SOLUTION_REL_RESIDUAL: f64 = 1e-10;

/// Uniform `nx × ny` cell grid on the unit square (`nx = ny`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx != ny {
            return Err(Error::InvalidArgument(format!(
                "grid must be square, got {nx}x{ny}"
            )));
        }
        if nx < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 cells per axis, got {nx}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(m: usize) -> Result<Self> {
        Self::new(m, m)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    /// Lexicographic cell index, x fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Positive diffusion coefficient, one value per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub nx: usize,
    pub ny: usize,
    pub k: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            nx: spec.nx,
            ny: spec.ny,
            k: vec![value; spec.n()],
        }
    }

    /// `max(k) / min(k)`.
    pub fn contrast(&self) -> f64 {
        let (lo, hi) = min_max(&self.k);
        hi / lo
    }

    fn validate(&self, spec: GridSpec) -> Result<()> {
        if self.nx != spec.nx || self.ny != spec.ny || self.k.len() != spec.n() {
            return Err(Error::InvalidArgument(format!(
                "coefficient field is {}x{} with {} values, grid is {}x{}",
                self.nx,
                self.ny,
                self.k.len(),
                spec.nx,
                spec.ny
            )));
        }
        if let Some(p) = self.k.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "coefficient in cell {p} is {} (must be positive and finite)",
                self.k[p]
            )));
        }
        Ok(())
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Half-sample symmetric reflection of `i` into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// One-dimensional Gaussian smoothing along rows (`stride = 1`) or columns.
fn smooth_axis(field: &[f64], spec: GridSpec, weights: &[f64], along_x: bool) -> Vec<f64> {
    let radius = (weights.len() / 2) as isize;
    let mut out = vec![0.0; field.len()];
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let mut acc = 0.0;
            for (w, d) in weights.iter().zip(-radius..=radius) {
                let src = if along_x {
                    spec.index(reflect(ix as isize + d, spec.nx), iy)
                } else {
                    spec.index(ix, reflect(iy as isize + d, spec.ny))
                };
                acc += w * field[src];
            }
            out[spec.index(ix, iy)] = acc;
        }
    }
    out
}

/// Log-normal coefficient field with an exactly prescribed contrast.
///
/// White noise (one standard normal per cell) is convolved with an isotropic
/// Gaussian kernel of standard deviation `corr_len · nx` cells, truncated at
/// three standard deviations, with reflecting boundaries. The smoothed field
/// `g` is rescaled affinely to span `[-ln(c)/2, ln(c)/2]`, and `k = exp(g)`,
/// so `max k / min k = c` and the geometric midpoint of the range is 1.
pub fn gaussian_random_field(
    spec: GridSpec,
    seed: u64,
    corr_len: f64,
    target_contrast: f64,
) -> Result<CoefficientField> {
    if !(corr_len > 0.0 && corr_len <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation length must lie in (0, 1], got {corr_len}"
        )));
    }
    if !(target_contrast >= 1.0 && target_contrast.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target contrast must be finite and at least 1, got {target_contrast}"
        )));
    }
    if target_contrast == 1.0 {
        return Ok(CoefficientField::constant(spec, 1.0));
    }

    let sigma = corr_len * spec.nx as f64;
    let radius = (3.0 * sigma).ceil() as isize;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let noise = NormalStream::new(seed).vector(spec.n());
    let g = smooth_axis(&noise, spec, &weights, true);
    let g = smooth_axis(&g, spec, &weights, false);

    let (lo, hi) = min_max(&g);
    if !(hi > lo) {
        return Err(Error::DegenerateField(format!(
            "smoothed field is constant ({lo}); cannot reach contrast {target_contrast}"
        )));
    }
    let log_c = target_contrast.ln();
    let scale = log_c / (hi - lo);
    let k = g
        .iter()
        .map(|&v| ((v - lo) * scale - 0.5 * log_c).exp())
        .collect();
    Ok(CoefficientField {
        nx: spec.nx,
        ny: spec.ny,
        k,
    })
}

/// Face transmissibility between two cells: harmonic mean over `h²`.
#[inline]
fn transmissibility(ki: f64, kj: f64, inv_h2: f64) -> f64 {
    2.0 * ki * kj / (ki + kj) * inv_h2
}

/// Five-point finite-volume matrix for `-div(k grad u)` with homogeneous
/// Dirichlet boundaries.
///
/// Interior faces carry the harmonic-mean transmissibility; a boundary face
/// sits half a cell from the cell center and contributes `2 k / h²` to the
/// diagonal.
pub fn assemble_fvm(spec: GridSpec, field: &CoefficientField) -> Result<CsrMatrix<f64>> {
    field.validate(spec)?;
    let (nx, ny) = (spec.nx, spec.ny);
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let k = &field.k;

    let mut row_ptr = Vec::with_capacity(spec.n() + 1);
    let mut col_idx = Vec::with_capacity(5 * spec.n());
    let mut values = Vec::with_capacity(5 * spec.n());
    row_ptr.push(0);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = spec.index(ix, iy);
            let kc = k[c];
            let boundary = 2.0 * kc * inv_h2;
            // neighbors in ascending column order: south, west, east, north
            let neighbors = [
                (iy > 0).then(|| spec.index(ix, iy - 1)),
                (ix > 0).then(|| spec.index(ix - 1, iy)),
                (ix + 1 < nx).then(|| spec.index(ix + 1, iy)),
                (iy + 1 < ny).then(|| spec.index(ix, iy + 1)),
            ];
            let mut diag = 0.0;
            let mut offdiag = [None; 4];
            for (slot, nb) in offdiag.iter_mut().zip(neighbors) {
                match nb {
                    Some(j) => {
                        let t = transmissibility(kc, k[j], inv_h2);
                        diag += t;
                        *slot = Some((j, -t));
                    }
                    None => diag += boundary,
                }
            }
            for (j, v) in offdiag[..2].iter().flatten() {
                col_idx.push(*j);
                values.push(*v);
            }
            col_idx.push(c);
            values.push(diag);
            for (j, v) in offdiag[2..].iter().flatten() {
                col_idx.push(*j);
                values.push(*v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::new(spec.n(), row_ptr, col_idx, values)
}

/// Batch of right-hand sides `b_i ~ N(0, I)`, optionally with `x_i = A⁻¹ b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub seed: u64,
    pub probes: Vec<Vec<f64>>,
    pub solutions: Option<Vec<Vec<f64>>>,
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.probes.first().map_or(0, Vec::len)
    }
}

/// `count` independent standard-normal vectors of length `n`, drawn in order
/// from one [`NormalStream`] seeded with `seed`.
pub fn sample_probes(n: usize, count: usize, seed: u64) -> Result<ProbeSet> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "probe count must be at least 1".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "probe dimension must be at least 1".into(),
        ));
    }
    let mut stream = NormalStream::new(seed);
    let probes = (0..count).map(|_| stream.vector(n)).collect();
    Ok(ProbeSet {
        seed,
        probes,
        solutions: None,
    })
}

fn rel_residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> Result<f64> {
    let ax = a.spmv(x)?;
    let num = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    Ok(if den == 0.0 { num } else { num / den })
}

/// Computes `x_i = A⁻¹ b_i` for every probe: dense Cholesky up to
/// [`DENSE_SOLVE_LIMIT`] unknowns, CG at tolerance `1e-12` beyond.
pub fn attach_solutions(a: &CsrMatrix<f64>, probes: ProbeSet) -> Result<ProbeSet> {
    let n = a.n();
    if let Some(p) = probes.probes.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    let solutions: Vec<Vec<f64>> = if n <= DENSE_SOLVE_LIMIT {
        let chol = a.to_dense().cholesky()?;
        probes
            .probes
            .iter()
            .map(|b| cholesky_solve(&chol, b))
            .collect::<Result<_>>()?
    } else {
        probes
            .probes
            .iter()
            .map(|b| pcg(a, b, None, 1e-12, 10 * n).map(|out| out.x))
            .collect::<Result<_>>()?
    };
    for (i, (x, b)) in solutions.iter().zip(&probes.probes).enumerate() {
        let r = rel_residual(a, x, b)?;
        if !(r <= SOLUTION_REL_RESIDUAL) {
            return Err(Error::InvalidArgument(format!(
                "reference solution {i} has relative residual {r:e}; A may not be SPD"
            )));
        }
    }
    Ok(ProbeSet {
        solutions: Some(solutions),
        ..probes
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(4, 5).is_err());
        assert!(GridSpec::new(1, 1).is_err());
        let g = GridSpec::square(4).unwrap();
        assert_eq!(g.n(), 16);
        assert_eq!(g.h(), 0.25);
    }

    #[test]
    fn reflection_folds_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(9, 4), 1);
        assert_eq!(reflect(2, 4), 2);
    }

    #[test]
    fn unit_contrast_gives_constant_field() {
        let g = GridSpec::square(5).unwrap();
        let f = gaussian_random_field(g, 1, 0.2, 1.0).unwrap();
        assert!(f.k.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn contrast_is_hit_exactly() {
        let g = GridSpec::square(16).unwrap();
        for seed in 0..5 {
            let f = gaussian_random_field(g, seed, 0.2, 10.0).unwrap();
            assert!((f.contrast() - 10.0).abs() <= 1e-8, "{}", f.contrast());
        }
    }

    #[test]
    fn field_argument_checks() {
        let g = GridSpec::square(4).unwrap();
        assert!(gaussian_random_field(g, 0, 0.0, 10.0).is_err());
        assert!(gaussian_random_field(g, 0, 1.5, 10.0).is_err());
        assert!(gaussian_random_field(g, 0, 0.2, 0.5).is_err());
    }

    #[test]
    fn interior_and_corner_stencils() {
        let g = GridSpec::square(4).unwrap();
        let a = assemble_fvm(g, &CoefficientField::constant(g, 1.0)).unwrap();
        let inv_h2 = 16.0;
        let c = g.index(1, 1);
        let (cols, vals) = a.row(c);
        assert_eq!(
            cols,
            &[
                g.index(1, 0),
                g.index(0, 1),
                c,
                g.index(2, 1),
                g.index(1, 2)
            ]
        );
        assert_eq!(vals, &[-inv_h2, -inv_h2, 4.0 * inv_h2, -inv_h2, -inv_h2]);

        let (cols, vals) = a.row(0);
        assert_eq!(cols, &[0, 1, 4]);
        assert_eq!(vals, &[6.0 * inv_h2, -inv_h2, -inv_h2]);
    }

    #[test]
    fn zero_probe_count_is_an_error() {
        assert!(sample_probes(4, 0, 1).is_err());
    }

    #[test]
    fn scalar_solution() {
        let a = CsrMatrix::from_triplets(1, &[(0, 0, 2.0)]).unwrap();
        let p = ProbeSet {
            seed: 0,
            probes: vec![vec![4.0]],
            solutions: None,
        };
        let p = attach_solutions(&a, p).unwrap();
        assert!((p.solutions.unwrap()[0][0] - 2.0).abs() < 1e-15);
    }
}
