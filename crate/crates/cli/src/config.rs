//! Experiment configuration: one JSON document per experiment.
//!
//! The effective config (after CLI overrides) is re-serialized into the run
//! directory and hashed into the manifest, so a run can always be checked
//! against the exact configuration that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bdsg_core::density::{GaussianMixture, MixtureComponent};
use bdsg_core::error::{Error, Result};
use bdsg_core::eval::GridSpec;
use bdsg_core::rng::fnv1a64_hex;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Closed-form Gaussian mixture (components as in the mixture JSON doc).
    Mixture { components: Vec<MixtureComponent> },
    /// Pre-existing CSV dataset.
    DatasetCsv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityBackend {
    /// Closed-form solution: the mixture itself supplies log p.
    Cfs,
    /// Trainable invertible residual flow.
    Flow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSection {
    pub blocks: usize,
    pub hidden: Vec<usize>,
    pub layer_lipschitz: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    /// When set and the distribution is a mixture, the flow trains on a
    /// fresh draw of this size instead of the boundary data.
    pub train_size: Option<usize>,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            blocks: 8,
            hidden: vec![32, 32],
            layer_lipschitz: 0.9,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            train_size: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySection {
    pub widths: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sample_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub eps_div: f64,
    pub learning_rate: f64,
    pub lr_decay: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection {
            widths: vec![2, 8, 8, 2],
            lambda1: 0.3,
            lambda2: 0.025,
            sample_size: 1024,
            batch_size: 256,
            epochs: 3000,
            eps_div: 1e-8,
            learning_rate: 1e-3,
            lr_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    /// Band fractions of the peak for boundary precision.
    pub epsilon_frac: f64,
    pub gamma_frac: f64,
    /// Thresholds swept by the grid classification metrics.
    pub grid_epsilon_fracs: Vec<f64>,
    /// Boundary samples drawn for BP/dispersion/cluster statistics.
    pub boundary_samples: usize,
    /// Normal/anomalous points per class for AUROC and AUPRC.
    pub eval_samples: usize,
    /// Flow samples rendered in the scatter plot.
    pub plot_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            epsilon_frac: 0.01,
            gamma_frac: 0.001,
            grid_epsilon_fracs: vec![0.005, 0.01, 0.02],
            boundary_samples: 1024,
            eval_samples: 512,
            plot_samples: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub backend: DensityBackend,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    pub grid: GridSpec,
    #[serde(default)]
    pub metrics: MetricsSection,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let bytes = std::fs::read(path)?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.distribution {
            DistributionSpec::Mixture { components } => {
                // constructing the mixture runs the full SPD/weight checks
                GaussianMixture::new(components.clone())?;
            }
            DistributionSpec::DatasetCsv { path } => {
                if !path.exists() {
                    return Err(Error::config(format!(
                        "dataset path {} does not exist",
                        path.display()
                    )));
                }
                if self.backend == DensityBackend::Cfs {
                    return Err(Error::config(
                        "cfs backend needs a closed-form mixture distribution",
                    ));
                }
            }
        }
        self.grid.validate()?;
        let b = &self.boundary;
        if b.batch_size > b.sample_size {
            return Err(Error::config(format!(
                "boundary batch size {} exceeds sample size {}",
                b.batch_size, b.sample_size
            )));
        }
        if b.widths.len() < 2 {
            return Err(Error::config("boundary widths need at least two entries"));
        }
        let m = &self.metrics;
        if !(0.0 < m.gamma_frac && m.gamma_frac < m.epsilon_frac && m.epsilon_frac < 1.0) {
            return Err(Error::config(
                "metric fractions must satisfy 0 < gamma < epsilon < 1",
            ));
        }
        for &e in &m.grid_epsilon_fracs {
            if !(0.0 < e && e < 1.0) {
                return Err(Error::config("grid epsilon fractions must lie in (0, 1)"));
            }
        }
        if self.backend == DensityBackend::Flow && self.flow.blocks == 0 {
            return Err(Error::config("flow backend needs at least one block"));
        }
        Ok(())
    }

    pub fn truth_mixture(&self) -> Result<Option<GaussianMixture>> {
        match &self.distribution {
            DistributionSpec::Mixture { components } => {
                Ok(Some(GaussianMixture::new(components.clone())?))
            }
            DistributionSpec::DatasetCsv { .. } => Ok(None),
        }
    }

    /// Canonical JSON used for hashing and provenance.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn hash(&self) -> String {
        fnv1a64_hex(self.canonical_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture_config() -> ExperimentConfig {
        ExperimentConfig {
            distribution: DistributionSpec::Mixture {
                components: GaussianMixture::standard_normal(2).components().to_vec(),
            },
            backend: DensityBackend::Cfs,
            flow: FlowSection::default(),
            boundary: BoundarySection::default(),
            grid: GridSpec::square(-6.0, 6.0, 101),
            metrics: MetricsSection::default(),
            output_dir: PathBuf::from("/tmp/bdsg-config-test"),
        }
    }

    #[test]
    fn json_roundtrip_and_stable_hash() {
        let cfg = mixture_config();
        let json = cfg.canonical_json();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.canonical_json(), json);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn tampering_changes_hash() {
        let cfg = mixture_config();
        let mut other = mixture_config();
        other.boundary.lambda1 = 0.31;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn validation_rejects_inconsistencies() {
        let mut cfg = mixture_config();
        cfg.boundary.batch_size = cfg.boundary.sample_size + 1;
        assert!(cfg.validate().is_err());

        let mut cfg2 = mixture_config();
        cfg2.metrics.gamma_frac = 0.5;
        cfg2.metrics.epsilon_frac = 0.01;
        assert!(cfg2.validate().is_err());

        let cfg3 = ExperimentConfig {
            distribution: DistributionSpec::DatasetCsv {
                path: PathBuf::from("/nonexistent/file.csv"),
            },
            ..mixture_config()
        };
        assert!(cfg3.validate().is_err());
    }

    #[test]
    fn cfs_with_dataset_is_rejected() {
        let dir = std::env::temp_dir().join("bdsg-config-csv");
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("d.csv");
        std::fs::write(&csv, "1.0,2.0\n").unwrap();
        let cfg = ExperimentConfig {
            distribution: DistributionSpec::DatasetCsv { path: csv },
            backend: DensityBackend::Cfs,
            ..mixture_config()
        };
        assert!(cfg.validate().is_err());
    }
}
