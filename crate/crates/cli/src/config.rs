use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use frobprec::{GridSpec, HistogramScale, LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce one experiment. Missing keys take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Cells per side; the system has `grid²` unknowns.
    pub grid: usize,
    pub grf_seed: u64,
    /// Smoothing length as a fraction of the domain width.
    pub corr_len: f64,
    /// Target `max k / min k`.
    pub contrast: f64,
    pub probe_count: usize,
    pub probe_seed: u64,
    /// Precompute `A⁻¹ b` for every probe; weighted training needs it.
    pub solve_probes: bool,
    pub unweighted: TrainConfig,
    pub weighted: TrainConfig,
    /// Training runs on `s · A`. Must be an even power of two so that factors
    /// map back exactly; `None` picks the one nearest `h²`.
    pub train_scale: Option<f64>,
    pub cg_tol: f64,
    /// Defaults to `10 n`.
    pub cg_max_iter: Option<usize>,
    /// Seed of the right-hand side used for the CG comparison.
    pub rhs_seed: u64,
    pub histogram_bins: usize,
    pub histogram_scale: HistogramScale,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            grf_seed: 0,
            corr_len: 0.2,
            contrast: 10.0,
            probe_count: 1000,
            probe_seed: 100,
            solve_probes: true,
            unweighted: TrainConfig {
                loss_kind: LossKind::Unweighted,
                ..TrainConfig::default()
            },
            weighted: TrainConfig::default(),
            train_scale: None,
            cg_tol: 1e-8,
            cg_max_iter: None,
            rhs_seed: 7,
            histogram_bins: 40,
            histogram_scale: HistogramScale::Log,
            output_dir: PathBuf::from("run"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).context("invalid experiment config")?;
        // the objective is implied by the section, whatever the file says
        cfg.unweighted.loss_kind = LossKind::Unweighted;
        cfg.weighted.loss_kind = LossKind::Weighted;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::square(self.grid)?;
        ensure!(
            self.corr_len > 0.0 && self.corr_len <= 1.0,
            "corr_len must lie in (0, 1], got {}",
            self.corr_len
        );
        ensure!(
            self.contrast >= 1.0,
            "contrast must be at least 1, got {}",
            self.contrast
        );
        ensure!(self.probe_count >= 1, "need at least one probe");
        ensure!(
            self.cg_tol > 0.0 && self.cg_tol < 1.0,
            "cg_tol must lie in (0, 1), got {}",
            self.cg_tol
        );
        ensure!(self.histogram_bins >= 1, "need at least one histogram bin");
        self.unweighted
            .validate()
            .context("unweighted training config")?;
        self.weighted
            .validate()
            .context("weighted training config")?;
        if let Some(s) = self.train_scale {
            even_power_of_two(s)?;
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::square(self.grid).expect("validated grid")
    }

    pub fn train_config(&self, kind: LossKind) -> &TrainConfig {
        match kind {
            LossKind::Unweighted => &self.unweighted,
            LossKind::Weighted => &self.weighted,
        }
    }

    /// `s` such that `s · A` has entries of order one.
    pub fn train_scale(&self) -> f64 {
        self.train_scale.unwrap_or_else(|| {
            let half = self.grid_spec().h().log2().round() as i32;
            2f64.powi(2 * half)
        })
    }

    pub fn cg_max_iter(&self) -> usize {
        self.cg_max_iter.unwrap_or(10 * self.grid * self.grid)
    }
}

/// Returns `k` for `s = 4^k`.
pub(crate) fn even_power_of_two(s: f64) -> Result<i32> {
    if !(s > 0.0 && s.is_finite()) {
        bail!("train_scale must be positive and finite, got {s}");
    }
    let e = s.log2().round() as i32;
    if 2f64.powi(e) != s || e % 2 != 0 {
        bail!("train_scale must be an even power of two (4^k), got {s}");
    }
    Ok(e / 2)
}
