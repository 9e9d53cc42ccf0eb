use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use frobprec::LossKind;
use frobprec_cli::pipeline::{self, Bundle, Precond};
use frobprec_cli::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "frobprec",
    version,
    about = "Train and compare sparse preconditioners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the matrix, coefficient field, probes and IC(0) factor.
    Generate {
        /// JSON experiment config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bundle directory (overrides `output_dir`).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        grf_seed: Option<u64>,
        #[arg(long)]
        probe_seed: Option<u64>,
        /// Print the effective config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Train a factor from IC(0) on one objective.
    Train {
        #[arg(long)]
        dir: PathBuf,
        /// unweighted, weighted, or both.
        #[arg(long, default_value = "both")]
        loss: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Run CG with the given preconditioners and write residual histories.
    Solve {
        #[arg(long)]
        dir: PathBuf,
        /// Repeatable; defaults to every preconditioner in the bundle.
        #[arg(long = "precond")]
        preconds: Vec<Precond>,
        #[arg(long)]
        rhs_seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Condition numbers, histograms, CG histories and loss curves.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            dir,
            grid,
            grf_seed,
            probe_seed,
            print_config,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(d) = dir {
                cfg.output_dir = d;
            }
            if let Some(g) = grid {
                cfg.grid = g;
            }
            if let Some(s) = grf_seed {
                cfg.grf_seed = s;
            }
            if let Some(s) = probe_seed {
                cfg.probe_seed = s;
            }
            cfg.validate()?;
            if print_config {
                print!("{}", cfg.to_json());
                return Ok(());
            }
            let m = pipeline::generate(&cfg)?;
            println!(
                "wrote {} (n = {}, {} files)",
                cfg.output_dir.display(),
                m.n,
                m.files.len()
            );
        }
        Command::Train {
            dir,
            loss,
            seed,
            epochs,
            step_size,
            batch_size,
        } => {
            let kinds = match loss.as_str() {
                "both" => vec![LossKind::Unweighted, LossKind::Weighted],
                other => vec![other.parse::<LossKind>()?],
            };
            let bundle = Bundle::open(&dir)?;
            for kind in kinds {
                let mut cfg = bundle.config.train_config(kind).clone();
                cfg.seed = seed.unwrap_or(cfg.seed);
                cfg.epochs = epochs.unwrap_or(cfg.epochs);
                cfg.step_size = step_size.unwrap_or(cfg.step_size);
                cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
                let r = pipeline::train(&dir, &cfg)?;
                println!(
                    "{kind}: {} epochs, final normalized loss {:.4}, {} diagonal clamps",
                    r.epochs_run, r.final_normalized_loss, r.floor_activations
                );
            }
        }
        Command::Solve {
            dir,
            mut preconds,
            rhs_seed,
            tol,
        } => {
            if preconds.is_empty() {
                let bundle = Bundle::open(&dir)?;
                preconds = Precond::TABLE_ORDER
                    .into_iter()
                    .filter(|&p| bundle.has(p))
                    .collect();
            }
            for r in pipeline::solve(&dir, &preconds, rhs_seed, tol)? {
                let mark = if r.converged { "" } else { " (not converged)" };
                println!("{:>10}: {} iterations{mark}", r.precond, r.iterations);
            }
        }
        Command::Report { dir } => {
            let r = pipeline::report(&dir)?;
            for (p, k) in &r.kappa {
                let iters = r.cg.iter().find(|c| &c.precond == p).map(|c| c.iterations);
                match (k, iters) {
                    (Some(k), Some(i)) => println!("{p:>10}: kappa {k:.2}, {i} CG iterations"),
                    (None, Some(i)) => println!("{p:>10}: kappa n/a, {i} CG iterations"),
                    _ => println!("{p:>10}: not in bundle"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
