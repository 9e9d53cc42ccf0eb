use std::fs;
use std::path::Path;
use std::process::Command;

use frobprec::{
    assemble_fvm, attach_solutions, condition_number, gaussian_random_field, sample_probes, Csr,
    LossKind, TrainConfig,
};
use frobprec_cli::pipeline::{self, Bundle, Precond};
use frobprec_cli::{ExperimentConfig, Manifest};

fn small_config(dir: &Path, grid: usize) -> ExperimentConfig {
    let quick = |kind| TrainConfig {
        epochs: 60,
        batch_size: 16,
        loss_kind: kind,
        ..TrainConfig::default()
    };
    ExperimentConfig {
        grid,
        probe_count: 40,
        unweighted: quick(LossKind::Unweighted),
        weighted: quick(LossKind::Weighted),
        output_dir: dir.to_owned(),
        ..ExperimentConfig::default()
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn smoke_bundle_loads_back_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4);
    let manifest = pipeline::generate(&cfg).unwrap();
    assert_eq!(manifest.n, 16);
    assert_eq!(manifest.seeds["grf"], cfg.grf_seed);
    assert_eq!(manifest.seeds["probes"], cfg.probe_seed);

    let spec = cfg.grid_spec();
    let field = gaussian_random_field(spec, cfg.grf_seed, cfg.corr_len, cfg.contrast).unwrap();
    let a = assemble_fvm(spec, &field).unwrap();
    let probes = attach_solutions(&a, sample_probes(16, 40, cfg.probe_seed).unwrap()).unwrap();

    let bundle = Bundle::open(tmp.path()).unwrap();
    assert_eq!(bundle.config, cfg);
    assert_eq!(bundle.matrix, a);
    assert_eq!(bundle.field().unwrap(), field);
    assert_eq!(bundle.probes().unwrap(), probes);
}

#[test]
fn regenerating_gives_identical_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 5);
    let first = pipeline::generate(&cfg).unwrap();
    let second = pipeline::generate(&cfg).unwrap();
    assert_eq!(first, second);
    let other = ExperimentConfig { grf_seed: 1, ..cfg };
    assert_ne!(
        pipeline::generate(&other).unwrap().files["matrix.mtx"],
        first.files["matrix.mtx"]
    );
}

#[test]
fn default_problem_has_4096_unknowns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        probe_count: 2,
        solve_probes: false,
        output_dir: tmp.path().to_owned(),
        ..ExperimentConfig::default()
    };
    assert_eq!(pipeline::generate(&cfg).unwrap().n, 4096);
}

#[test]
fn zero_step_reproduces_ic0_file() {
    // 6×6 is not a power-of-two grid, so the scale is 4^-3 rather than h²
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 6);
    pipeline::generate(&cfg).unwrap();
    let zero = TrainConfig {
        step_size: 0.0,
        ..cfg.weighted.clone()
    };
    let r = pipeline::train(tmp.path(), &zero).unwrap();
    assert_eq!(r.train_scale, 1.0 / 64.0);
    assert_eq!(
        fs::read(tmp.path().join("factor_weighted.mtx")).unwrap(),
        fs::read(tmp.path().join("factor_ic0.mtx")).unwrap()
    );
}

#[test]
fn weighted_training_lowers_the_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 8);
    pipeline::generate(&cfg).unwrap();
    let r = pipeline::train(
        tmp.path(),
        &TrainConfig {
            epochs: 300,
            ..cfg.weighted
        },
    )
    .unwrap();
    assert_eq!(r.history.len(), 300);
    assert_eq!(r.history[0], 1.0);
    assert!(r.final_normalized_loss < 1.0, "{}", r.final_normalized_loss);
    let loss = read_csv(&tmp.path().join("loss_weighted.csv"));
    assert_eq!(loss[0], ["epoch", "normalized_loss"]);
    assert_eq!(loss.len(), 301);
    let m = Manifest::load(tmp.path()).unwrap();
    assert_eq!(m.seeds["train_weighted"], cfg.weighted.seed);
    assert!(m.has("factor_weighted.mtx") && m.has("train_weighted.json"));
}

#[test]
fn weighted_training_without_solutions_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        solve_probes: false,
        ..small_config(tmp.path(), 4)
    };
    pipeline::generate(&cfg).unwrap();
    let err = format!(
        "{:#}",
        pipeline::train(tmp.path(), &cfg.weighted).unwrap_err()
    );
    assert!(
        err.contains("reference solutions") && err.contains("solve_probes"),
        "{err}"
    );
    // the unweighted objective does not need them
    pipeline::train(tmp.path(), &cfg.unweighted).unwrap();
}

#[test]
fn mutated_artifacts_are_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4);
    pipeline::generate(&cfg).unwrap();
    let path = tmp.path().join("matrix.mtx");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replacen("1 1 ", "1 1 1", 1);
    fs::write(&path, text).unwrap();
    let err = format!(
        "{:#}",
        pipeline::train(tmp.path(), &cfg.unweighted).unwrap_err()
    );
    assert!(err.contains("checksum mismatch for matrix.mtx"), "{err}");
    assert!(pipeline::report(tmp.path()).is_err());
}

#[test]
fn report_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 6);
    pipeline::generate(&cfg).unwrap();

    // before training only A and IC(0) are available
    let r = pipeline::report(tmp.path()).unwrap();
    assert_eq!(r.cg.len(), 2);
    let table = read_csv(&tmp.path().join("condition_numbers.csv"));
    assert_eq!(
        table[0],
        ["metric", "A", "Frobenius", "Weighted Frobenius", "IC(0)"]
    );
    assert_eq!(table[1][0], "kappa");
    assert_eq!(table[1][2], "n/a");
    assert_eq!(table[1][3], "n/a");
    assert_eq!(table[2][0], "cg_iterations");

    pipeline::train(tmp.path(), &cfg.unweighted).unwrap();
    pipeline::train(tmp.path(), &cfg.weighted).unwrap();
    let r = pipeline::report(tmp.path()).unwrap();
    assert!(r.kappa.iter().all(|(_, k)| k.is_some()));
    let table = read_csv(&tmp.path().join("condition_numbers.csv"));
    assert!(table[1][1..]
        .iter()
        .all(|c| c.parse::<f64>().unwrap() >= 1.0));

    for p in Precond::TABLE_ORDER {
        let hist = read_csv(&tmp.path().join(format!("hist_{p}.csv")));
        assert_eq!(hist[0], ["bin_lo", "bin_hi", "count"]);
        assert_eq!(hist.len(), cfg.histogram_bins + 1);
        let total: usize = hist[1..]
            .iter()
            .map(|row| row[2].parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 36, "{p}");

        let cg = read_csv(&tmp.path().join(format!("cg_{p}.csv")));
        assert_eq!(cg[0], ["iteration", "rel_residual"]);
        assert_eq!(cg[1], ["0", "1"]);
        assert!(cg.last().unwrap()[1].parse::<f64>().unwrap() <= cfg.cg_tol);
    }
    let m = Manifest::load(tmp.path()).unwrap();
    m.verify(tmp.path()).unwrap();
    assert!(m.has("report.json") && m.has("loss_unweighted.csv"));
}

#[test]
fn identity_operator_has_unit_condition_number() {
    let eigs = pipeline::spectrum(&Csr::identity(5), None)
        .unwrap()
        .unwrap();
    assert_eq!(condition_number(&eigs).unwrap(), 1.0);
}

#[test]
fn solve_writes_requested_histories_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4);
    pipeline::generate(&cfg).unwrap();
    let r = pipeline::solve(tmp.path(), &[Precond::Ic0], Some(3), Some(1e-6)).unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].converged);
    assert!(tmp.path().join("cg_ic0.csv").exists());
    assert!(!tmp.path().join("cg_none.csv").exists());
    assert_eq!(Manifest::load(tmp.path()).unwrap().seeds["rhs"], 3);
    let err = pipeline::solve(tmp.path(), &[Precond::Weighted], None, None).unwrap_err();
    assert!(err.to_string().contains("train --loss weighted"), "{err}");
}

fn frobprec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_frobprec"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn command_line_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bundle");
    let cfg_path = tmp.path().join("config.json");
    fs::write(&cfg_path, r#"{"grid": 4, "probe_count": 20, "weighted": {"epochs": 20, "batch_size": 8}, "unweighted": {"epochs": 20, "batch_size": 8}}"#).unwrap();
    let d = dir.to_str().unwrap();

    let out = frobprec(&[
        "generate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--dir",
        d,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = frobprec(&["train", "--dir", d, "--loss", "both", "--seed", "5"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(Manifest::load(&dir).unwrap().seeds["train_weighted"], 5);
    let out = frobprec(&[
        "solve",
        "--dir",
        d,
        "--precond",
        "none",
        "--precond",
        "weighted",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = frobprec(&["report", "--dir", d]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("kappa"));

    let out = frobprec(&["train", "--dir", d, "--loss", "sideways"]);
    assert!(!out.status.success());
    let out = frobprec(&[
        "report",
        "--dir",
        tmp.path().join("missing").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));

    let out = frobprec(&["generate", "--grid", "8", "--print-config"]);
    let printed = ExperimentConfig::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(printed.grid, 8);
}
