//! The four commands. Every command works on a bundle directory, checks the
//! manifest before reading anything, and records what it writes.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use frobprec::random::NormalStream;
use frobprec::sparse::mtx;
use frobprec::spectral::DENSE_LIMIT;
use frobprec::{
    assemble_fvm, attach_solutions, condition_number, eigen_histogram, gaussian_random_field,
    ic0_factorize, pcg, precond_spectrum, sample_probes, CoefficientField, Csr, DenseMatrix, Error,
    Factor, LossKind, LowerFactor, ProbeSet, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{even_power_of_two, ExperimentConfig};
use crate::manifest::Manifest;

pub const CONFIG_FILE: &str = "config.json";
pub const MATRIX_FILE: &str = "matrix.mtx";
pub const COEFFICIENT_FILE: &str = "coefficient.json";
pub const PROBES_FILE: &str = "probes.mtx";
pub const SOLUTIONS_FILE: &str = "solutions.mtx";
pub const CONDITION_FILE: &str = "condition_numbers.csv";
pub const REPORT_FILE: &str = "report.json";

/// The preconditioners being compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precond {
    None,
    Ic0,
    Unweighted,
    Weighted,
}

impl Precond {
    /// Column order of the condition-number table.
    pub const TABLE_ORDER: [Precond; 4] = [
        Precond::None,
        Precond::Unweighted,
        Precond::Weighted,
        Precond::Ic0,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Precond::None => "none",
            Precond::Ic0 => "ic0",
            Precond::Unweighted => "unweighted",
            Precond::Weighted => "weighted",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precond::None => "A",
            Precond::Ic0 => "IC(0)",
            Precond::Unweighted => "Frobenius",
            Precond::Weighted => "Weighted Frobenius",
        }
    }

    pub fn factor_file(self) -> Option<String> {
        match self {
            Precond::None => None,
            p => Some(format!("factor_{}.mtx", p.key())),
        }
    }

    fn of_kind(kind: LossKind) -> Self {
        match kind {
            LossKind::Unweighted => Precond::Unweighted,
            LossKind::Weighted => Precond::Weighted,
        }
    }
}

impl fmt::Display for Precond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Precond {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Precond::None),
            "ic0" => Ok(Precond::Ic0),
            "unweighted" => Ok(Precond::Unweighted),
            "weighted" => Ok(Precond::Weighted),
            other => bail!("unknown preconditioner '{other}' (none, ic0, unweighted, weighted)"),
        }
    }
}

pub fn loss_file(kind: LossKind) -> String {
    format!("loss_{kind}.csv")
}

pub fn train_file(kind: LossKind) -> String {
    format!("train_{kind}.json")
}

pub fn cg_file(p: Precond) -> String {
    format!("cg_{p}.csv")
}

pub fn hist_file(p: Precond) -> String {
    format!("hist_{p}.csv")
}

/// Persisted summary of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub loss_kind: LossKind,
    pub config: TrainConfig,
    /// Training ran on `train_scale · A`; the stored factor is mapped back.
    pub train_scale: f64,
    pub epochs_run: usize,
    /// Epoch-0 batch loss of the scaled problem.
    pub initial_loss: f64,
    pub final_normalized_loss: f64,
    pub floor_activations: usize,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub precond: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_rel_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub n: usize,
    /// `None` for preconditioners not in the bundle or above the dense limit.
    pub kappa: Vec<(String, Option<f64>)>,
    pub cg: Vec<SolveRecord>,
    pub histogram_bins: usize,
    pub histogram_scale: frobprec::HistogramScale,
    pub cg_tol: f64,
    pub rhs_seed: u64,
}

/// An opened, verified bundle.
pub struct Bundle {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: Manifest,
    pub matrix: Csr,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = Manifest::load(dir)?;
        manifest.verify(dir)?;
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        let matrix = read_with(dir, MATRIX_FILE, mtx::read_csr)?;
        Ok(Self {
            dir: dir.to_owned(),
            config,
            manifest,
            matrix,
        })
    }

    pub fn field(&self) -> Result<CoefficientField> {
        let text = fs::read_to_string(self.dir.join(COEFFICIENT_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn probes(&self) -> Result<ProbeSet> {
        let columns = |m: DenseMatrix<f64>| (0..m.cols()).map(|j| m.column(j)).collect();
        let probes = columns(read_with(&self.dir, PROBES_FILE, mtx::read_dense)?);
        let solutions = if self.manifest.has(SOLUTIONS_FILE) {
            Some(columns(read_with(
                &self.dir,
                SOLUTIONS_FILE,
                mtx::read_dense,
            )?))
        } else {
            None
        };
        Ok(ProbeSet {
            seed: self.manifest.seeds["probes"],
            probes,
            solutions,
        })
    }

    /// The factor for `p`; `Ok(None)` for the unpreconditioned case.
    pub fn factor(&self, p: Precond) -> Result<Option<Factor>> {
        let Some(name) = p.factor_file() else {
            return Ok(None);
        };
        if !self.manifest.has(&name) {
            bail!(
                "bundle {} has no {} factor; run `frobprec train --loss {}` first",
                self.dir.display(),
                p,
                p
            );
        }
        read_with(&self.dir, &name, mtx::read_factor).map(Some)
    }

    pub fn has(&self, p: Precond) -> bool {
        p.factor_file().is_none_or(|f| self.manifest.has(&f))
    }

    pub fn train_record(&self, kind: LossKind) -> Result<TrainRecord> {
        let text = fs::read_to_string(self.dir.join(train_file(kind)))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        write_file(&self.dir, name, f)?;
        self.manifest.record(&self.dir, name)
    }

    fn save(&self) -> Result<()> {
        self.manifest.save(&self.dir)
    }
}

fn read_with<T>(
    dir: &Path,
    name: &str,
    read: impl FnOnce(BufReader<File>) -> frobprec::Result<T>,
) -> Result<T> {
    let path = dir.join(name);
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_csv<W: Write>(
    w: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Builds the problem and writes a fresh bundle to `cfg.output_dir`.
pub fn generate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let spec = cfg.grid_spec();
    let field = gaussian_random_field(spec, cfg.grf_seed, cfg.corr_len, cfg.contrast)?;
    let a = assemble_fvm(spec, &field)?;
    let mut probes = sample_probes(a.n(), cfg.probe_count, cfg.probe_seed)?;
    if cfg.solve_probes {
        probes = attach_solutions(&a, probes)?;
    }
    let l0 = ic0_factorize(&a).context("IC(0) of the generated matrix")?;

    let mut manifest = Manifest {
        grid: cfg.grid,
        n: a.n(),
        train_scale: cfg.train_scale(),
        ..Manifest::default()
    };
    manifest.seeds.insert("grf".into(), cfg.grf_seed);
    manifest.seeds.insert("probes".into(), cfg.probe_seed);
    manifest.seeds.insert("rhs".into(), cfg.rhs_seed);

    let mut put =
        |name: &str, f: &mut dyn FnMut(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
            write_file(dir, name, f)?;
            manifest.record(dir, name)
        };
    put(CONFIG_FILE, &mut |w| {
        Ok(w.write_all(cfg.to_json().as_bytes())?)
    })?;
    put(COEFFICIENT_FILE, &mut |w| {
        serde_json::to_writer(&mut *w, &field)?;
        Ok(writeln!(w)?)
    })?;
    put(MATRIX_FILE, &mut |w| Ok(mtx::write_csr(w, &a)?))?;
    put(PROBES_FILE, &mut |w| {
        Ok(mtx::write_dense(
            w,
            &DenseMatrix::from_columns(&probes.probes)?,
        )?)
    })?;
    if let Some(x) = &probes.solutions {
        put(SOLUTIONS_FILE, &mut |w| {
            Ok(mtx::write_dense(w, &DenseMatrix::from_columns(x)?)?)
        })?;
    }
    let ic0 = Precond::Ic0.factor_file().unwrap();
    put(&ic0, &mut |w| Ok(mtx::write_factor(w, &l0)?))?;
    manifest.save(dir)?;
    Ok(manifest)
}

/// Trains one objective from IC(0) and stores the factor, report and loss curve.
///
/// The optimization runs on `s · A` (with solutions `x / s`); since `s = 4^k`,
/// `IC(0)(s A) = 2^k IC(0)(A)` exactly and the trained factor is stored as
/// `L / 2^k`, a preconditioner for the original `A`.
pub fn train(dir: &Path, cfg: &TrainConfig) -> Result<TrainRecord> {
    let mut bundle = Bundle::open(dir)?;
    let kind = cfg.loss_kind;
    let mut probes = bundle.probes()?;
    if kind == LossKind::Weighted && probes.solutions.is_none() {
        bail!(
            "{}; this bundle was generated with solve_probes = false, regenerate it to train the weighted objective",
            Error::MissingSolutions
        );
    }
    let s = bundle.manifest.train_scale;
    let root = 2f64.powi(even_power_of_two(s)?);
    let a = bundle.matrix.scaled(s);
    if let Some(x) = probes.solutions.as_mut() {
        let inv = 1.0 / s;
        x.iter_mut().flatten().for_each(|v| *v *= inv);
    }
    let l0 = ic0_factorize(&a).context("IC(0) initialization")?;
    let report = frobprec::train(&a, &l0, &probes, cfg)
        .with_context(|| format!("training the {kind} objective"))?;
    let inv_root = 1.0 / root;
    let factor = report.factor.with_values(
        report
            .factor
            .values()
            .iter()
            .map(|v| v * inv_root)
            .collect(),
    )?;

    let record = TrainRecord {
        loss_kind: kind,
        config: cfg.clone(),
        train_scale: s,
        epochs_run: report.epochs_run,
        initial_loss: report.initial_loss,
        final_normalized_loss: *report.history.last().expect("at least one epoch"),
        floor_activations: report.floor_activations,
        history: report.history,
    };
    let name = Precond::of_kind(kind).factor_file().unwrap();
    bundle.write(&name, |w| Ok(mtx::write_factor(w, &factor)?))?;
    bundle.write(&train_file(kind), |w| {
        serde_json::to_writer_pretty(&mut *w, &record)?;
        Ok(writeln!(w)?)
    })?;
    bundle.write(&loss_file(kind), |w| write_loss_csv(w, &record.history))?;
    bundle
        .manifest
        .seeds
        .insert(format!("train_{kind}"), cfg.seed);
    bundle.save()?;
    Ok(record)
}

fn write_loss_csv<W: Write>(w: W, history: &[f64]) -> Result<()> {
    write_csv(
        w,
        &["epoch", "normalized_loss"],
        history
            .iter()
            .enumerate()
            .map(|(k, v)| vec![k.to_string(), v.to_string()]),
    )
}

/// Deterministic right-hand side for the CG comparison.
pub fn rhs(n: usize, seed: u64) -> Vec<f64> {
    NormalStream::new(seed).vector(n)
}

/// Runs CG with each preconditioner and writes `cg_<name>.csv`.
pub fn solve(
    dir: &Path,
    preconds: &[Precond],
    rhs_seed: Option<u64>,
    tol: Option<f64>,
) -> Result<Vec<SolveRecord>> {
    let mut bundle = Bundle::open(dir)?;
    let seed = rhs_seed.unwrap_or(bundle.manifest.seeds["rhs"]);
    let tol = tol.unwrap_or(bundle.config.cg_tol);
    let records = solve_all(&mut bundle, preconds, seed, tol)?;
    bundle.manifest.seeds.insert("rhs".into(), seed);
    bundle.save()?;
    Ok(records)
}

fn solve_all(
    bundle: &mut Bundle,
    preconds: &[Precond],
    seed: u64,
    tol: f64,
) -> Result<Vec<SolveRecord>> {
    let b = rhs(bundle.matrix.n(), seed);
    let max_iter = bundle.config.cg_max_iter();
    let mut records = Vec::new();
    for &p in preconds {
        let factor = bundle.factor(p)?;
        let (history, converged) = match pcg(&bundle.matrix, &b, factor.as_ref(), tol, max_iter) {
            Ok(out) => (out.residual_history, true),
            Err(Error::NotConverged { history, .. }) => (history, false),
            Err(e) => return Err(anyhow!(e).context(format!("CG with preconditioner {p}"))),
        };
        bundle.write(&cg_file(p), |w| {
            write_csv(
                w,
                &["iteration", "rel_residual"],
                history
                    .iter()
                    .enumerate()
                    .map(|(k, r)| vec![k.to_string(), r.to_string()]),
            )
        })?;
        records.push(SolveRecord {
            precond: p.to_string(),
            iterations: history.len() - 1,
            converged,
            final_rel_residual: *history.last().unwrap(),
        });
    }
    Ok(records)
}

/// Spectrum of `P⁻¹ A`, or `None` above the dense diagnostic limit.
pub fn spectrum(a: &Csr, factor: Option<&Factor>) -> Result<Option<Vec<f64>>> {
    if a.n() > DENSE_LIMIT {
        return Ok(None);
    }
    let identity;
    let l = match factor {
        Some(l) => l,
        None => {
            identity = LowerFactor::identity(a.n());
            &identity
        }
    };
    Ok(Some(precond_spectrum(a, l)?))
}

/// Condition numbers, histograms, CG histories and loss curves for every
/// preconditioner present in the bundle.
pub fn report(dir: &Path) -> Result<ReportRecord> {
    let mut bundle = Bundle::open(dir)?;
    let available: Vec<Precond> = Precond::TABLE_ORDER
        .into_iter()
        .filter(|&p| bundle.has(p))
        .collect();
    let (bins, scale) = (bundle.config.histogram_bins, bundle.config.histogram_scale);

    let mut kappa = Vec::new();
    for p in Precond::TABLE_ORDER {
        if !available.contains(&p) {
            kappa.push((p, None));
            continue;
        }
        let factor = bundle.factor(p)?;
        let Some(eigs) = spectrum(&bundle.matrix, factor.as_ref())? else {
            kappa.push((p, None));
            continue;
        };
        let hist = eigen_histogram(&eigs, bins, scale)?;
        bundle.write(&hist_file(p), |w| {
            write_csv(
                w,
                &["bin_lo", "bin_hi", "count"],
                hist.counts.iter().enumerate().map(|(b, c)| {
                    vec![
                        hist.edges[b].to_string(),
                        hist.edges[b + 1].to_string(),
                        c.to_string(),
                    ]
                }),
            )
        })?;
        kappa.push((p, Some(condition_number(&eigs)?)));
    }

    let seed = bundle.manifest.seeds["rhs"];
    let tol = bundle.config.cg_tol;
    let cg = solve_all(&mut bundle, &available, seed, tol)?;

    for kind in [LossKind::Unweighted, LossKind::Weighted] {
        if bundle.manifest.has(&train_file(kind)) {
            let record = bundle.train_record(kind)?;
            bundle.write(&loss_file(kind), |w| write_loss_csv(w, &record.history))?;
        }
    }

    let cell = |v: Option<String>| v.unwrap_or_else(|| "n/a".into());
    let mut header = vec!["metric"];
    header.extend(Precond::TABLE_ORDER.iter().map(|p| p.label()));
    let kappa_row = std::iter::once("kappa".to_string())
        .chain(kappa.iter().map(|(_, k)| cell(k.map(|k| k.to_string()))))
        .collect();
    let cg_row = std::iter::once("cg_iterations".to_string())
        .chain(Precond::TABLE_ORDER.iter().map(|p| {
            cell(
                cg.iter()
                    .find(|r| r.precond == p.key())
                    .map(|r| r.iterations.to_string()),
            )
        }))
        .collect();
    bundle.write(CONDITION_FILE, |w| {
        write_csv(w, &header, [kappa_row, cg_row])
    })?;

    let record = ReportRecord {
        n: bundle.matrix.n(),
        kappa: kappa.iter().map(|(p, k)| (p.to_string(), *k)).collect(),
        cg,
        histogram_bins: bins,
        histogram_scale: scale,
        cg_tol: tol,
        rhs_seed: seed,
    };
    bundle.write(REPORT_FILE, |w| {
        serde_json::to_writer_pretty(&mut *w, &record)?;
        Ok(writeln!(w)?)
    })?;
    bundle.save()?;
    Ok(record)
}
