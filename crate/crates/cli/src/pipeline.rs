//! Full experiment pipeline: data -> density model -> boundary generator ->
//! evaluation -> artifacts.
//!
//! Every stage draws its randomness from a seed derived as
//! hash(master_seed, stage_name), so stages never couple through shared RNG
//! state and any single stage can be reproduced in isolation. All artifacts
//! land in the configured output directory together with a manifest that
//! records the config hash, the master seed, and per-stage completion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bdsg_core::anomaly::ModeSet;
use bdsg_core::batch::Batch;
use bdsg_core::boundary::{train_boundary, BdsgHyperparams, BoundaryModel};
use bdsg_core::checkpoint::{
    load_json, save_json, BoundaryCheckpoint, FlowCheckpoint, MlpCheckpoint,
};
use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::error::{Error, Result};
use bdsg_core::eval::{
    auprc, auroc, bp1, bp2_from_fields, density_field, dispersion, grid_metrics_from_fields,
    DensityField, EvalReport,
};
use bdsg_core::rng::{derive_seed, fnv1a64_hex, SplitMix64};
use bdsg_core::Activation;

use crate::config::{DensityBackend, DistributionSpec, ExperimentConfig};
use crate::dataset::{
    generate_synthetic, load_dataset, loss_history_to_csv, scalar_history_to_csv, write_dataset,
};
use crate::svg::emit_scatter;

pub const MANIFEST_FORMAT: &str = "bdsg-run-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub stages_completed: Vec<String>,
    /// Artifact name -> path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

/// Paths of everything a run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub config_json: PathBuf,
    pub data_csv: PathBuf,
    pub flow_checkpoint: Option<PathBuf>,
    pub flow_history_csv: Option<PathBuf>,
    pub boundary_checkpoint: PathBuf,
    pub history_csv: PathBuf,
    pub report_json: PathBuf,
    pub scatter_svg: PathBuf,
    pub manifest_json: PathBuf,
}

/// Re-checks a manifest against the stored config bytes.
pub fn verify_manifest(run_dir: &Path) -> Result<bool> {
    let manifest: RunManifest = load_json(&run_dir.join("manifest.json"))?;
    let config_bytes = std::fs::read(run_dir.join("config.json"))?;
    Ok(fnv1a64_hex(&config_bytes) == manifest.config_hash)
}

struct StageTracker {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    completed: Vec<String>,
    artifacts: BTreeMap<String, String>,
}

impl StageTracker {
    fn record(&mut self, stage: &str) {
        self.completed.push(stage.to_string());
    }

    fn artifact(&mut self, name: &str, file: &str) -> PathBuf {
        self.artifacts.insert(name.to_string(), file.to_string());
        self.dir.join(file)
    }

    fn write_manifest(&self, failed: Option<(&str, &Error)>) -> Result<PathBuf> {
        let manifest = RunManifest {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            status: if failed.is_some() { "failed" } else { "completed" }.to_string(),
            failed_stage: failed.map(|(s, _)| s.to_string()),
            error: failed.map(|(_, e)| e.to_string()),
            stages_completed: self.completed.clone(),
            artifacts: self.artifacts.clone(),
        };
        let path = self.dir.join("manifest.json");
        save_json(&manifest, &path)?;
        Ok(path)
    }
}

/// Executes the pipeline stages in order, skipping flow training for the
/// closed-form backend. On stage failure the partial artifacts stay on disk
/// and the manifest names the failed stage.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunArtifacts> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let config_json_path = config.output_dir.join("config.json");
    let canonical = config.canonical_json();
    std::fs::write(&config_json_path, &canonical)?;
    let mut tracker = StageTracker {
        dir: config.output_dir.clone(),
        config_hash: fnv1a64_hex(canonical.as_bytes()),
        seed,
        completed: Vec::new(),
        artifacts: BTreeMap::new(),
    };
    tracker.artifacts.insert("config".into(), "config.json".into());
    match run_stages(config, seed, &mut tracker) {
        Ok(mut artifacts) => {
            artifacts.manifest_json = tracker.write_manifest(None)?;
            artifacts.config_json = config_json_path;
            Ok(artifacts)
        }
        Err((stage, e)) => {
            tracker.write_manifest(Some((stage, &e)))?;
            Err(e)
        }
    }
}

fn run_stages(
    config: &ExperimentConfig,
    seed: u64,
    tracker: &mut StageTracker,
) -> std::result::Result<RunArtifacts, (&'static str, Error)> {
    let fail = |stage: &'static str| move |e: Error| (stage, e);

    // --- stage: data -------------------------------------------------------
    let truth = config.truth_mixture().map_err(fail("gen-data"))?;
    let data_csv = tracker.artifact("data", "data.csv");
    let data: Batch = match &config.distribution {
        DistributionSpec::Mixture { .. } => {
            let mixture = truth.as_ref().expect("mixture distribution");
            generate_synthetic(
                mixture,
                config.boundary.sample_size,
                derive_seed(seed, "gen-data"),
                &data_csv,
            )
            .map_err(fail("gen-data"))?
        }
        DistributionSpec::DatasetCsv { path } => {
            let batch = load_dataset(path).map_err(fail("gen-data"))?;
            write_dataset(&batch, &data_csv).map_err(fail("gen-data"))?;
            batch
        }
    };
    tracker.record("gen-data");

    // --- stage: density model ---------------------------------------------
    let mut flow_checkpoint = None;
    let mut flow_history_csv = None;
    let flow_model: Option<FlowModel> = match config.backend {
        DensityBackend::Cfs => None,
        DensityBackend::Flow => {
            let stage_seed = derive_seed(seed, "train-flow");
            let fc = &config.flow;
            let mut flow = FlowModel::new(
                data.dim(),
                fc.blocks,
                &fc.hidden,
                Activation::Softplus,
                fc.layer_lipschitz,
                stage_seed,
            )
            .map_err(fail("train-flow"))?;
            let train_data = match (&config.distribution, fc.train_size) {
                (DistributionSpec::Mixture { .. }, Some(n)) => truth
                    .as_ref()
                    .expect("mixture distribution")
                    .sample(n, derive_seed(seed, "flow-data")),
                _ => data.clone(),
            };
            let history = flow
                .train(
                    &train_data,
                    &FlowTrainConfig {
                        epochs: fc.epochs,
                        batch_size: fc.batch_size.min(train_data.len()),
                        learning_rate: fc.learning_rate,
                        lr_decay: fc.lr_decay,
                        seed: stage_seed,
                    },
                )
                .map_err(fail("train-flow"))?;
            let ck_path = tracker.artifact("flow_checkpoint", "flow.json");
            save_json(&FlowCheckpoint::capture(&flow, stage_seed), &ck_path)
                .map_err(fail("train-flow"))?;
            let hist_path = tracker.artifact("flow_history", "flow_history.csv");
            std::fs::write(&hist_path, scalar_history_to_csv("nll", &history))
                .map_err(|e| ("train-flow", Error::Io(e)))?;
            flow_checkpoint = Some(ck_path);
            flow_history_csv = Some(hist_path);
            Some(flow)
        }
    };
    tracker.record("train-flow");
    let density: &dyn DensityModel = match (&flow_model, &truth) {
        (Some(f), _) => f,
        (None, Some(m)) => m,
        (None, None) => unreachable!("validated: cfs backend implies mixture"),
    };

    // --- stage: boundary training ------------------------------------------
    let hp = BdsgHyperparams {
        lambda1: config.boundary.lambda1,
        lambda2: config.boundary.lambda2,
        sample_size: config.boundary.sample_size,
        batch_size: config.boundary.batch_size,
        epochs: config.boundary.epochs,
        seed: derive_seed(seed, "train-boundary"),
        eps_div: config.boundary.eps_div,
        learning_rate: config.boundary.learning_rate,
        lr_decay: config.boundary.lr_decay,
    };
    let boundary = train_boundary(density, &data, &config.boundary.widths, &hp)
        .map_err(|e| ("train-boundary", e.cause))?;
    let boundary_ck = tracker.artifact("boundary_checkpoint", "boundary.json");
    save_json(&BoundaryCheckpoint::capture(&boundary), &boundary_ck)
        .map_err(fail("train-boundary"))?;
    let history_csv = tracker.artifact("loss_history", "loss_history.csv");
    std::fs::write(&history_csv, loss_history_to_csv(boundary.history()))
        .map_err(|e| ("train-boundary", Error::Io(e)))?;
    tracker.record("train-boundary");

    // --- stage: evaluation ---------------------------------------------------
    let report = evaluate(config, seed, &truth, flow_model.as_ref(), density, &boundary)
        .map_err(fail("evaluate"))?;
    let report_json = tracker.artifact("report", "report.json");
    save_json(&report, &report_json).map_err(fail("evaluate"))?;
    tracker.record("evaluate");

    // --- stage: plot ---------------------------------------------------------
    let boundary_samples = boundary
        .sample(
            config.metrics.boundary_samples,
            derive_seed(seed, "eval-boundary-samples"),
        )
        .map_err(fail("plot"))?;
    let flow_samples = flow_model
        .as_ref()
        .map(|f| f.sample(config.metrics.plot_samples, derive_seed(seed, "plot-flow")));
    let scatter_svg = tracker.artifact("scatter", "scatter.svg");
    emit_scatter(&data, flow_samples.as_ref(), &boundary_samples, &scatter_svg)
        .map_err(fail("plot"))?;
    tracker.record("plot");

    Ok(RunArtifacts {
        output_dir: config.output_dir.clone(),
        config_json: tracker.dir.join("config.json"),
        data_csv,
        flow_checkpoint,
        flow_history_csv,
        boundary_checkpoint: boundary_ck,
        history_csv,
        report_json,
        scatter_svg,
        manifest_json: tracker.dir.join("manifest.json"),
    })
}

fn evaluate(
    config: &ExperimentConfig,
    seed: u64,
    truth: &Option<GaussianMixture>,
    flow: Option<&FlowModel>,
    density: &dyn DensityModel,
    boundary: &BoundaryModel,
) -> Result<EvalReport> {
    let grid = &config.grid;
    let metrics = &config.metrics;
    // Ground truth for evaluation: the mixture when known, else the model
    // density itself (self-consistency mode for external datasets).
    let truth_density: &dyn DensityModel = match truth {
        Some(m) => m,
        None => density,
    };
    let truth_field = density_field(truth_density, grid)?;
    let model_field: DensityField = match flow {
        Some(f) => density_field(f, grid)?,
        None => truth_field.clone(),
    };
    let mut grid_reports = Vec::new();
    for &eps in &metrics.grid_epsilon_fracs {
        grid_reports.push(grid_metrics_from_fields(&truth_field, &model_field, eps)?);
    }
    let boundary_samples = boundary.sample(
        metrics.boundary_samples,
        derive_seed(seed, "eval-boundary-samples"),
    )?;
    let bp1_v = bp1(
        &boundary_samples,
        truth_density,
        metrics.gamma_frac,
        metrics.epsilon_frac,
    )?;
    let bp2_v = match flow {
        Some(_) if truth.is_some() => Some(bp2_from_fields(
            &boundary_samples,
            grid,
            &model_field,
            &truth_field,
            metrics.gamma_frac,
            metrics.epsilon_frac,
        )?),
        _ => None,
    };
    // ranking metrics: fresh in-distribution draws vs uniform box noise,
    // scored by the model's negative log-density
    let n_eval = metrics.eval_samples;
    let normal_eval: Batch = match truth {
        Some(m) => m.sample(n_eval, derive_seed(seed, "eval-normal")),
        None => flow
            .expect("dataset runs use the flow backend")
            .sample(n_eval, derive_seed(seed, "eval-normal")),
    };
    let mut rng = SplitMix64::seed_from_u64(derive_seed(seed, "eval-anomalies"));
    let mut scores = Vec::with_capacity(2 * n_eval);
    let mut labels = Vec::with_capacity(2 * n_eval);
    for row in normal_eval.rows() {
        scores.push(anomaly_score(density, row)?);
        labels.push(0u8);
    }
    for _ in 0..n_eval {
        let p: Vec<f64> = (0..grid.dim())
            .map(|axis| rng.uniform(grid.lower[axis], grid.upper[axis]))
            .collect();
        scores.push(anomaly_score(density, &p)?);
        labels.push(1u8);
    }
    let auroc_v = auroc(&scores, &labels)?;
    let auprc_v = auprc(&scores, &labels)?;
    let dispersion_v = dispersion(&boundary_samples)?;
    let cluster_shares = match truth {
        Some(m) if m.components().len() >= 2 => {
            let centers: Vec<Vec<f64>> =
                m.components().iter().map(|c| c.mean.clone()).collect();
            let data = load_dataset(&config.output_dir.join("data.csv"))?;
            let modes = ModeSet::partition_by_nearest(&data, &centers)?;
            if modes.cluster_count() < 2 {
                vec![1.0]
            } else {
                let mut counts = vec![0usize; modes.cluster_count()];
                for s in boundary_samples.rows() {
                    let (k, _) = bdsg_core::anomaly::assign_boundary_cluster(s, &modes);
                    counts[k] += 1;
                }
                counts
                    .iter()
                    .map(|&c| c as f64 / boundary_samples.len() as f64)
                    .collect()
            }
        }
        _ => vec![1.0],
    };
    Ok(EvalReport {
        epsilon_frac: metrics.epsilon_frac,
        gamma_frac: metrics.gamma_frac,
        grid: grid_reports,
        bp1: bp1_v,
        bp2: bp2_v,
        auroc: auroc_v,
        auprc: auprc_v,
        dispersion: dispersion_v,
        cluster_shares,
        final_loss: boundary.history().last().copied(),
    })
}

/// Higher = more anomalous; unreachable points rank above everything finite.
fn anomaly_score(density: &dyn DensityModel, x: &[f64]) -> Result<f64> {
    match density.log_density(x) {
        Ok(ld) => Ok(-ld),
        Err(Error::Inversion { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Loads a density model from a file, dispatching on the JSON format tag:
/// flow checkpoints have format "bdsg-flow", everything else is parsed as a
/// mixture spec document.
pub fn load_density(path: &Path) -> Result<Box<dyn DensityModel>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == bdsg_core::checkpoint::FLOW_FORMAT => {
            let ck: FlowCheckpoint = serde_json::from_value(value)?;
            Ok(Box::new(ck.restore()?))
        }
        Some(other) => Err(Error::config(format!(
            "file {} has format {other:?}, expected a flow checkpoint or mixture spec",
            path.display()
        ))),
        None => Ok(Box::new(GaussianMixture::from_json(&text)?)),
    }
}

/// Loads a boundary model checkpoint.
pub fn load_boundary(path: &Path) -> Result<BoundaryModel> {
    let ck: BoundaryCheckpoint = load_json(path)?;
    ck.restore()
}

/// Loads a plain MLP checkpoint (exposed for completeness/tooling).
pub fn load_mlp(path: &Path) -> Result<bdsg_core::MlpModel> {
    let ck: MlpCheckpoint = load_json(path)?;
    ck.restore()
}
