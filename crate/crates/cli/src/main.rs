//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation failure, 3 numeric failure,
//! 4 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bdsg_cli::config::ExperimentConfig;
use bdsg_cli::dataset::{
    generate_synthetic, load_dataset, loss_history_to_csv, scalar_history_to_csv,
};
use bdsg_cli::pipeline::{load_boundary, load_density, run_experiment, verify_manifest};
use bdsg_cli::svg::emit_scatter;
use bdsg_core::anomaly::{classify, verdicts_to_jsonl};
use bdsg_core::batch::Batch;
use bdsg_core::boundary::{train_boundary, BdsgHyperparams};
use bdsg_core::checkpoint::{save_json, BoundaryCheckpoint, FlowCheckpoint};
use bdsg_core::density::{peak_density, DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::error::Error;
use bdsg_core::eval::{
    auprc, auroc, bp1, bp2_from_fields, density_field, dispersion, grid_metrics_from_fields,
    EvalReport, GridSpec,
};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

#[derive(Parser)]
#[command(
    name = "bdsg",
    about = "Support-boundary sample generation and anomaly detection experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from a Gaussian-mixture spec and write CSV.
    GenData {
        /// Mixture spec JSON: {"components": [{weight, mean, covariance}]}
        #[arg(long)]
        mixture: PathBuf,
        /// Number of points to draw.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an invertible residual flow on a CSV dataset.
    TrainFlow {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        blocks: usize,
        /// Hidden widths of each residual sub-network, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "32,32")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.9)]
        lipschitz: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1.0)]
        lr_decay: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-epoch NLL history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Train a boundary generator against a frozen density model.
    TrainBoundary {
        #[arg(long)]
        data: PathBuf,
        /// Density model file: flow checkpoint or mixture spec JSON.
        #[arg(long)]
        density: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,8,8,2")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        lambda1: f64,
        #[arg(long, default_value_t = 0.025)]
        lambda2: f64,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
        #[arg(long, default_value_t = 3000)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1.0)]
        lr_decay: f64,
        #[arg(long, default_value_t = 1e-8)]
        eps_div: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Loss-history CSV (epoch,total,l0,l1,l2).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Classify dataset points by the epsilon-threshold rule; JSONL out.
    Score {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Threshold as a fraction of the model's peak density (the peak is
        /// estimated over the scored points and the model's modes).
        #[arg(long, default_value_t = 0.01, conflicts_with = "epsilon_abs")]
        epsilon_frac: f64,
        /// Absolute probability threshold; overrides the fraction.
        #[arg(long)]
        epsilon_abs: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model (and optionally a boundary generator) on a grid.
    Eval {
        /// Ground-truth mixture spec JSON.
        #[arg(long)]
        truth: PathBuf,
        /// Model density: flow checkpoint or mixture spec (defaults to truth).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Boundary-model checkpoint for BP/dispersion statistics.
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "-10,-10")]
        grid_lower: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "10,10")]
        grid_upper: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        grid_resolution: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.02")]
        epsilon_fracs: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        epsilon_frac: f64,
        #[arg(long, default_value_t = 0.001)]
        gamma_frac: f64,
        #[arg(long, default_value_t = 1024)]
        boundary_samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; all stage seeds derive from it.
        #[arg(long)]
        seed: u64,
        /// Override the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override boundary training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override flow training epochs.
        #[arg(long)]
        flow_epochs: Option<usize>,
        /// Verify an existing run's manifest instead of executing.
        #[arg(long, default_value_t = false)]
        check_manifest: bool,
    },
    /// Render a scatter SVG of data / flow samples / boundary samples.
    Plot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        flow_samples: Option<PathBuf>,
        #[arg(long)]
        boundary_samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Shape { .. }
        | Error::Parse { .. }
        | Error::UndefinedMetric(_) => 2,
        Error::Numeric { .. } | Error::Inversion { .. } => 3,
        Error::Io(_) | Error::Json(_) => 4,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::GenData {
            mixture,
            m,
            seed,
            out,
        } => {
            let spec = std::fs::read_to_string(&mixture)?;
            let mix = GaussianMixture::from_json(&spec)?;
            let batch = generate_synthetic(&mix, m, seed, &out)?;
            println!("wrote {} points of dimension {} to {}", batch.len(), batch.dim(), out.display());
            Ok(())
        }
        Command::TrainFlow {
            data,
            blocks,
            hidden,
            lipschitz,
            epochs,
            batch_size,
            learning_rate,
            lr_decay,
            seed,
            out,
            history,
        } => {
            let batch = load_dataset(&data)?;
            let mut flow = FlowModel::new(
                batch.dim(),
                blocks,
                &hidden,
                Activation::Softplus,
                lipschitz,
                seed,
            )?;
            let hist = flow.train(
                &batch,
                &FlowTrainConfig {
                    epochs,
                    batch_size: batch_size.min(batch.len()),
                    learning_rate,
                    lr_decay,
                    seed,
                },
            )?;
            save_json(&FlowCheckpoint::capture(&flow, seed), &out)?;
            if let Some(h) = history {
                std::fs::write(&h, scalar_history_to_csv("nll", &hist))?;
            }
            if let Some(last) = hist.last() {
                println!("trained {epochs} epochs, final mean NLL {last:.4}; checkpoint at {}", out.display());
            } else {
                println!("no training epochs requested; checkpoint at {}", out.display());
            }
            Ok(())
        }
        Command::TrainBoundary {
            data,
            density,
            widths,
            lambda1,
            lambda2,
            batch_size,
            epochs,
            learning_rate,
            lr_decay,
            eps_div,
            seed,
            out,
            history,
        } => {
            let batch = load_dataset(&data)?;
            let model = load_density(&density)?;
            let hp = BdsgHyperparams {
                lambda1,
                lambda2,
                sample_size: batch.len(),
                batch_size,
                epochs,
                seed,
                eps_div,
                learning_rate,
                lr_decay,
            };
            let boundary = train_boundary(model.as_ref(), &batch, &widths, &hp)
                .map_err(|e| e.cause)?;
            save_json(&BoundaryCheckpoint::capture(&boundary), &out)?;
            if let Some(h) = history {
                std::fs::write(&h, loss_history_to_csv(boundary.history()))?;
            }
            let last = boundary.history().last();
            match last {
                Some(l) => println!(
                    "trained {epochs} epochs; final loss {:.6} (l0 {:.6}, l1 {:.4}, l2 {:.4})",
                    l.total, l.l0, l.l1, l.l2
                ),
                None => println!("no training epochs requested"),
            }
            Ok(())
        }
        Command::Score {
            density,
            data,
            epsilon_frac,
            epsilon_abs,
            out,
        } => {
            let model = load_density(&density)?;
            let batch = load_dataset(&data)?;
            let epsilon = match epsilon_abs {
                Some(e) => e,
                None => {
                    let peak = peak_density(model.as_ref(), batch.rows())?;
                    epsilon_frac * peak
                }
            };
            let mut verdicts = Vec::with_capacity(batch.len());
            for row in batch.rows() {
                verdicts.push(classify(model.as_ref(), row, epsilon)?);
            }
            std::fs::write(&out, verdicts_to_jsonl(&verdicts))?;
            let anomalous = verdicts.iter().filter(|v| v.is_anomalous).count();
            println!(
                "scored {} points at epsilon {epsilon:.3e}: {anomalous} anomalous",
                batch.len()
            );
            Ok(())
        }
        Command::Eval {
            truth,
            model,
            boundary,
            grid_lower,
            grid_upper,
            grid_resolution,
            epsilon_fracs,
            epsilon_frac,
            gamma_frac,
            boundary_samples,
            seed,
            out,
        } => {
            let truth_spec = std::fs::read_to_string(&truth)?;
            let truth_mix = GaussianMixture::from_json(&truth_spec)?;
            let model_density: Box<dyn DensityModel> = match &model {
                Some(p) => load_density(p)?,
                None => Box::new(truth_mix.clone()),
            };
            let grid = GridSpec {
                lower: grid_lower,
                upper: grid_upper,
                resolution: vec![grid_resolution; 2],
            };
            let truth_field = density_field(&truth_mix, &grid)?;
            let model_field = density_field(model_density.as_ref(), &grid)?;
            let mut grid_reports = Vec::new();
            for &eps in &epsilon_fracs {
                grid_reports.push(grid_metrics_from_fields(&truth_field, &model_field, eps)?);
            }
            let (bp1_v, bp2_v, dispersion_v, final_loss) = match &boundary {
                Some(bp) => {
                    let bmodel = load_boundary(bp)?;
                    let samples =
                        bmodel.sample(boundary_samples, derive_seed(seed, "eval-boundary-samples"))?;
                    let b1 = bp1(&samples, &truth_mix, gamma_frac, epsilon_frac)?;
                    let b2 = if model.is_some() {
                        Some(bp2_from_fields(
                            &samples,
                            &grid,
                            &model_field,
                            &truth_field,
                            gamma_frac,
                            epsilon_frac,
                        )?)
                    } else {
                        None
                    };
                    (
                        b1,
                        b2,
                        dispersion(&samples)?,
                        bmodel.history().last().copied(),
                    )
                }
                None => (0.0, None, 0.0, None),
            };
            // ranking metrics against uniform box noise
            let n_eval = 512usize;
            let normal = truth_mix.sample(n_eval, derive_seed(seed, "eval-normal"));
            let mut rng =
                bdsg_core::rng::SplitMix64::seed_from_u64(derive_seed(seed, "eval-anomalies"));
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for row in normal.rows() {
                scores.push(-model_density.log_density(row).unwrap_or(f64::NEG_INFINITY));
                labels.push(0u8);
            }
            for _ in 0..n_eval {
                let p: Vec<f64> = (0..2)
                    .map(|a| rng.uniform(grid.lower[a], grid.upper[a]))
                    .collect();
                scores.push(match model_density.log_density(&p) {
                    Ok(ld) => -ld,
                    Err(_) => f64::INFINITY,
                });
                labels.push(1u8);
            }
            let report = EvalReport {
                epsilon_frac,
                gamma_frac,
                grid: grid_reports,
                bp1: bp1_v,
                bp2: bp2_v,
                auroc: auroc(&scores, &labels)?,
                auprc: auprc(&scores, &labels)?,
                dispersion: dispersion_v,
                cluster_shares: vec![1.0],
                final_loss,
            };
            save_json(&report, &out)?;
            println!("wrote evaluation report to {}", out.display());
            Ok(())
        }
        Command::Run {
            config,
            seed,
            output_dir,
            epochs,
            flow_epochs,
            check_manifest,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(e) = epochs {
                cfg.boundary.epochs = e;
            }
            if let Some(e) = flow_epochs {
                cfg.flow.epochs = e;
            }
            if check_manifest {
                let ok = verify_manifest(&cfg.output_dir)?;
                if ok {
                    println!("manifest check passed for {}", cfg.output_dir.display());
                    return Ok(());
                }
                return Err(Error::config(format!(
                    "manifest hash mismatch in {}",
                    cfg.output_dir.display()
                )));
            }
            let artifacts = run_experiment(&cfg, seed)?;
            println!("run complete; artifacts in {}", artifacts.output_dir.display());
            Ok(())
        }
        Command::Plot {
            data,
            flow_samples,
            boundary_samples,
            out,
        } => {
            let d = load_dataset(&data)?;
            let f = flow_samples.map(|p| load_dataset(&p)).transpose()?;
            let b = match boundary_samples {
                Some(p) => load_dataset(&p)?,
                None => Batch::empty(d.dim()),
            };
            emit_scatter(&d, f.as_ref(), &b, &out)?;
            println!("wrote scatter plot to {}", out.display());
            Ok(())
        }
    }
}
