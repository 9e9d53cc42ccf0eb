//! Frobenius objectives for a factored preconditioner `P = L Lᵀ`, their
//! stochastic (Hutchinson) estimates, analytic gradients restricted to the
//! pattern of `L`, and plain gradient descent on the entries of `L`.
//!
//! Both objectives reduce to one per-probe form `‖L Lᵀ v − t‖²`:
//!
//! * unweighted `‖P − A‖_F²`: `(v, t) = (z, A z)` for `z ~ N(0, I)`;
//! * weighted `‖(P − A) A⁻¹‖_F²`: `(v, t) = (x, b)` with `x = A⁻¹ b`, since
//!   `(P − A) A⁻¹ b = P x − b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::ProbeSet;
use crate::random::seeded;
use crate::scalar::Real;
use crate::sparse::{cholesky_solve, frob_norm_sq, CsrMatrix, DenseMatrix, LowerFactor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `‖L Lᵀ − A‖_F²`
    Unweighted,
    /// `‖(L Lᵀ − A) A⁻¹‖_F²`
    Weighted,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Unweighted => "unweighted",
            Self::Weighted => "weighted",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unweighted" => Ok(Self::Unweighted),
            "weighted" => Ok(Self::Weighted),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss kind '{other}' (expected 'unweighted' or 'weighted')"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub step_size: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Diagonal entries are clamped to at least this value after every step.
    pub diag_floor: f64,
    pub loss_kind: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-3,
            batch_size: 512,
            epochs: 10_000,
            seed: 0,
            diag_floor: 1e-8,
            loss_kind: LossKind::Weighted,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and non-negative, got {}",
                self.step_size
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch size and epoch count must be at least 1".into(),
            ));
        }
        if !(self.diag_floor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diagonal floor must be positive, got {}",
                self.diag_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport<T> {
    pub factor: LowerFactor<T>,
    /// Batch-mean loss per epoch divided by the epoch-0 value.
    pub history: Vec<f64>,
    /// Unnormalized epoch-0 batch loss.
    pub initial_loss: f64,
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub floor_activations: usize,
}

/// Scratch vectors for one probe evaluation.
struct Workspace<T> {
    u: Vec<T>,
    r: Vec<T>,
    ltr: Vec<T>,
}

impl<T: Real> Workspace<T> {
    fn new(n: usize) -> Self {
        Self {
            u: vec![T::zero(); n],
            r: vec![T::zero(); n],
            ltr: vec![T::zero(); n],
        }
    }
}

/// Fills `ws.u = Lᵀ v` and `ws.r = L u − t`, returning `‖r‖²`.
fn residual<T: Real>(l: &LowerFactor<T>, v: &[T], t: &[T], ws: &mut Workspace<T>) -> Result<T> {
    check_len(l.n(), t.len())?;
    l.mul_transpose_vec_into(v, &mut ws.u)?;
    l.mul_vec_into(&ws.u, &mut ws.r)?;
    let mut sq = T::zero();
    for (ri, &ti) in ws.r.iter_mut().zip(t) {
        *ri = *ri - ti;
        sq = sq + *ri * *ri;
    }
    Ok(sq)
}

/// Adds `scale · ∂‖L Lᵀ v − t‖²/∂L` into `grad` (aligned with `l.values()`).
fn accumulate_gradient<T: Real>(
    l: &LowerFactor<T>,
    v: &[T],
    ws: &mut Workspace<T>,
    scale: T,
    grad: &mut [T],
) -> Result<()> {
    l.mul_transpose_vec_into(&ws.r, &mut ws.ltr)?;
    let two = scale + scale;
    for i in 0..l.n() {
        let span = l.row_ptr()[i]..l.row_ptr()[i + 1];
        let (ri, vi) = (ws.r[i], v[i]);
        for (g, &j) in grad[span.clone()].iter_mut().zip(&l.col_idx()[span]) {
            *g = *g + two * (ri * ws.u[j] + vi * ws.ltr[j]);
        }
    }
    Ok(())
}

/// `‖L (Lᵀ v) − t‖²` using two sparse products; `L Lᵀ` is never formed.
pub fn loss_probe<T: Real>(l: &LowerFactor<T>, v: &[T], t: &[T]) -> Result<T> {
    let mut ws = Workspace::new(l.n());
    residual(l, v, t, &mut ws)
}

/// Gradient of `‖L Lᵀ v − t‖²` with respect to the stored entries of `L`.
///
/// With `u = Lᵀ v` and `r = L u − t`, the full gradient is
/// `2 (r uᵀ + v (Lᵀ r)ᵀ)`; only entries in the pattern of `L` are evaluated.
pub fn loss_gradient_probe<T: Real>(l: &LowerFactor<T>, v: &[T], t: &[T]) -> Result<Vec<T>> {
    let mut ws = Workspace::new(l.n());
    residual(l, v, t, &mut ws)?;
    let mut grad = vec![T::zero(); l.nnz()];
    accumulate_gradient(l, v, &mut ws, T::one(), &mut grad)?;
    Ok(grad)
}

/// Exact objective value through dense matrices (diagnostic scale only).
pub fn exact_objective<T: Real>(a: &CsrMatrix<T>, l: &LowerFactor<T>, kind: LossKind) -> Result<T> {
    check_len(a.n(), l.n())?;
    let ad = a.to_dense();
    let ld = l.to_dense();
    let e = ld.matmul(&ld.transpose())?.sub(&ad)?;
    match kind {
        LossKind::Unweighted => Ok(frob_norm_sq(&e)),
        LossKind::Weighted => {
            let chol = ad.cholesky()?;
            let mut total = T::zero();
            for i in 0..e.rows() {
                let y = cholesky_solve(&chol, e.row(i))?;
                total = total + y.iter().fold(T::zero(), |acc, &v| acc + v * v);
            }
            Ok(total)
        }
    }
}

/// Dense `L Lᵀ − A`.
pub fn error_matrix<T: Real>(a: &CsrMatrix<T>, l: &LowerFactor<T>) -> Result<DenseMatrix<T>> {
    let ld = l.to_dense();
    ld.matmul(&ld.transpose())?.sub(&a.to_dense())
}

/// `(v_i, t_i)` pairs for every probe in the pool.
fn probe_pairs(
    a: &CsrMatrix<f64>,
    probes: &ProbeSet,
    kind: LossKind,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("probe set is empty".into()));
    }
    match kind {
        LossKind::Unweighted => probes
            .probes
            .iter()
            .map(|z| Ok((z.clone(), a.spmv(z)?)))
            .collect(),
        LossKind::Weighted => {
            let solutions = probes.solutions.as_ref().ok_or(Error::MissingSolutions)?;
            check_len(probes.len(), solutions.len())?;
            probes
                .probes
                .iter()
                .zip(solutions)
                .map(|(b, x)| {
                    check_len(a.n(), x.len())?;
                    Ok((x.clone(), b.clone()))
                })
                .collect()
        }
    }
}

/// Gradient descent on the entries of `L`, starting from `l0`.
///
/// Each epoch draws `batch_size` probes with replacement from the pool, takes
/// the batch-mean loss and gradient at the current factor, applies
/// `L ← L − α ∇`, and clamps diagonal entries below `diag_floor`. Per-probe
/// gradients may be computed in parallel but are summed in draw order.
pub fn train(
    a: &CsrMatrix<f64>,
    l0: &LowerFactor<f64>,
    probes: &ProbeSet,
    cfg: &TrainConfig,
) -> Result<TrainReport<f64>> {
    cfg.validate()?;
    check_len(a.n(), l0.n())?;
    let pairs = probe_pairs(a, probes, cfg.loss_kind)?;
    let n = a.n();
    let nnz = l0.nnz();

    let mut rng = seeded(cfg.seed);
    let mut l = l0.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut initial_loss = f64::NAN;
    let mut floor_activations = 0;
    // On a single thread, accumulating straight into `grad` gives the same
    // sums as the buffered reduction without the per-probe buffers.
    let sequential = rayon::current_num_threads() == 1;
    let (mut per_probe, mut losses) = if sequential {
        (Vec::new(), Vec::new())
    } else {
        (vec![0.0; cfg.batch_size * nnz], vec![0.0; cfg.batch_size])
    };
    let mut ws = Workspace::new(n);
    let mut grad = vec![0.0; nnz];
    let inv_batch = 1.0 / cfg.batch_size as f64;
    let diag_pos: Vec<usize> = (0..n).map(|i| l.diag_pos(i)).collect();

    for epoch in 0..cfg.epochs {
        let batch: Vec<usize> = (0..cfg.batch_size)
            .map(|_| rand::Rng::random_range(&mut rng, 0..pairs.len()))
            .collect();

        grad.fill(0.0);
        let mut loss_sum = 0.0;
        if sequential {
            for &p in &batch {
                let (v, t) = &pairs[p];
                loss_sum += residual(&l, v, t, &mut ws)?;
                accumulate_gradient(&l, v, &mut ws, 1.0, &mut grad)?;
            }
        } else {
            per_probe
                .par_chunks_mut(nnz)
                .zip(losses.par_iter_mut())
                .zip(batch.par_iter())
                .try_for_each_init(
                    || Workspace::new(n),
                    |ws, ((g, loss), &p)| -> Result<()> {
                        let (v, t) = &pairs[p];
                        *loss = residual(&l, v, t, ws)?;
                        g.fill(0.0);
                        accumulate_gradient(&l, v, ws, 1.0, g)
                    },
                )?;
            for (g, loss) in per_probe.chunks(nnz).zip(&losses) {
                loss_sum += loss;
                for (acc, &gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
        }

        let batch_loss = loss_sum * inv_batch;
        if !batch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: batch_loss,
            });
        }
        if epoch == 0 {
            initial_loss = batch_loss;
        }
        history.push(if initial_loss > 0.0 {
            batch_loss / initial_loss
        } else {
            1.0
        });

        for (v, &g) in l.values_mut().iter_mut().zip(&grad) {
            *v -= cfg.step_size * inv_batch * g;
        }
        let vals = l.values_mut();
        for &d in &diag_pos {
            if !(vals[d] >= cfg.diag_floor) {
                if !vals[d].is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        loss: vals[d],
                    });
                }
                vals[d] = cfg.diag_floor;
                floor_activations += 1;
            }
        }
    }

    Ok(TrainReport {
        factor: l,
        history,
        initial_loss,
        config: cfg.clone(),
        epochs_run: cfg.epochs,
        floor_activations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(l: f64) -> LowerFactor<f64> {
        LowerFactor::new(1, vec![0, 1], vec![0], vec![l]).unwrap()
    }

    #[test]
    fn scalar_loss_by_hand() {
        assert_eq!(loss_probe(&scalar(2.0), &[1.0], &[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn scalar_gradient_by_hand() {
        // d/dl (l² − a)² = 4 l (l² − a)
        assert_eq!(
            loss_gradient_probe(&scalar(2.0), &[1.0], &[3.0]).unwrap(),
            vec![8.0]
        );
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let g = loss_gradient_probe(&scalar(2.0), &[0.5], &[2.0]).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(loss_probe(&scalar(2.0), &[1.0, 2.0], &[1.0]).is_err());
        assert!(loss_gradient_probe(&scalar(2.0), &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn loss_kind_parsing() {
        assert_eq!("weighted".parse::<LossKind>().unwrap(), LossKind::Weighted);
        assert_eq!(
            "unweighted".parse::<LossKind>().unwrap(),
            LossKind::Unweighted
        );
        assert!("other".parse::<LossKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                step_size: -1.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                diag_floor: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn weighted_without_solutions_is_rejected() {
        let a = CsrMatrix::<f64>::identity(2);
        let probes = ProbeSet {
            seed: 0,
            probes: vec![vec![1.0, 0.0]],
            solutions: None,
        };
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            ..Default::default()
        };
        assert!(matches!(
            train(&a, &LowerFactor::identity(2), &probes, &cfg),
            Err(Error::MissingSolutions)
        ));
    }
}
