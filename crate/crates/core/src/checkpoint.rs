//! Versioned model checkpoints.
//!
//! Checkpoints are JSON documents with an explicit format tag and version.
//! Parameters are stored as row-major 64-bit float arrays; serde_json
//! prints shortest round-trip representations, so save/load is bit-exact
//! and re-saving an unchanged model reproduces identical bytes.
//!
//! Formats:
//! - `bdsg-mlp` v1:      one dense network (layer widths, activation,
//!                       per-layer weight/bias arrays, build seed).
//! - `bdsg-flow` v1:     dim, per-layer Lipschitz target, block sub-networks.
//! - `bdsg-boundary` v1: latent dim, hyper-parameters, network, history.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::mlp::{Activation, MlpModel};
use crate::boundary::{BdsgHyperparams, BoundaryModel, LossBreakdown};
use crate::density::FlowModel;
use crate::error::{Error, Result};

pub const MLP_FORMAT: &str = "bdsg-mlp";
pub const FLOW_FORMAT: &str = "bdsg-flow";
pub const BOUNDARY_FORMAT: &str = "bdsg-boundary";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub version: u32,
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    /// Row-major (out_dim x in_dim) per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
}

impl MlpCheckpoint {
    pub fn capture(model: &MlpModel, seed: u64) -> MlpCheckpoint {
        MlpCheckpoint {
            format: MLP_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layer_widths: model.widths().to_vec(),
            activation: model.activation(),
            weights: model.layers().iter().map(|l| l.weight.clone()).collect(),
            biases: model.layers().iter().map(|l| l.bias.clone()).collect(),
            seed,
        }
    }

    pub fn restore(&self) -> Result<MlpModel> {
        check_header(&self.format, MLP_FORMAT, self.version)?;
        MlpModel::from_parts(
            self.layer_widths.clone(),
            self.activation,
            self.weights.clone(),
            self.biases.clone(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowCheckpoint {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub layer_lipschitz: f64,
    pub seed: u64,
    pub blocks: Vec<MlpCheckpoint>,
}

impl FlowCheckpoint {
    pub fn capture(flow: &FlowModel, seed: u64) -> FlowCheckpoint {
        FlowCheckpoint {
            format: FLOW_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dim: flow.dim(),
            layer_lipschitz: flow.layer_lipschitz(),
            seed,
            blocks: flow
                .blocks()
                .iter()
                .map(|b| MlpCheckpoint::capture(b.sub_network(), seed))
                .collect(),
        }
    }

    pub fn restore(&self) -> Result<FlowModel> {
        check_header(&self.format, FLOW_FORMAT, self.version)?;
        let subs = self
            .blocks
            .iter()
            .map(|b| b.restore())
            .collect::<Result<Vec<_>>>()?;
        FlowModel::from_sub_networks(self.dim, subs, self.layer_lipschitz)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryCheckpoint {
    pub format: String,
    pub version: u32,
    pub latent_dim: usize,
    pub hyper: BdsgHyperparams,
    pub network: MlpCheckpoint,
    pub history: Vec<LossBreakdown>,
}

impl BoundaryCheckpoint {
    pub fn capture(model: &BoundaryModel) -> BoundaryCheckpoint {
        BoundaryCheckpoint {
            format: BOUNDARY_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            latent_dim: model.latent_dim(),
            hyper: model.hyper().clone(),
            network: MlpCheckpoint::capture(model.network(), model.hyper().seed),
            history: model.history().to_vec(),
        }
    }

    pub fn restore(&self) -> Result<BoundaryModel> {
        check_header(&self.format, BOUNDARY_FORMAT, self.version)?;
        BoundaryModel::from_parts(
            self.network.restore()?,
            self.hyper.clone(),
            self.history.clone(),
        )
    }
}

fn check_header(format: &str, expected: &str, version: u32) -> Result<()> {
    if format != expected {
        return Err(Error::config(format!(
            "checkpoint format {format:?} where {expected:?} was expected"
        )));
    }
    if version != CHECKPOINT_VERSION {
        return Err(Error::config(format!(
            "unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"
        )));
    }
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_checkpoint_roundtrip_is_bit_exact() {
        let model = MlpModel::build(&[2, 8, 8, 2], Activation::Tanh, 7).unwrap();
        let ck = MlpCheckpoint::capture(&model, 7);
        let json = serde_json::to_string_pretty(&ck).unwrap();
        let back: MlpCheckpoint = serde_json::from_str(&json).unwrap();
        let restored = back.restore().unwrap();
        for (a, b) in model.params_flat().iter().zip(restored.params_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.seed, 7);
        // re-serialization is byte-identical
        let json2 = serde_json::to_string_pretty(&MlpCheckpoint::capture(&restored, 7)).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn flow_checkpoint_roundtrip() {
        let flow = FlowModel::new(2, 3, &[6], Activation::Softplus, 0.9, 11).unwrap();
        let ck = FlowCheckpoint::capture(&flow, 11);
        let json = serde_json::to_string(&ck).unwrap();
        let back: FlowCheckpoint = serde_json::from_str(&json).unwrap();
        let restored = back.restore().unwrap();
        let z = [0.3, -0.8];
        let (x1, ld1) = flow.forward(&z).unwrap();
        let (x2, ld2) = restored.forward(&z).unwrap();
        assert_eq!(x1[0].to_bits(), x2[0].to_bits());
        assert_eq!(ld1.to_bits(), ld2.to_bits());
    }

    #[test]
    fn wrong_format_is_rejected() {
        let model = MlpModel::build(&[2, 4, 2], Activation::Elu, 1).unwrap();
        let mut ck = MlpCheckpoint::capture(&model, 1);
        ck.format = "something-else".into();
        assert!(ck.restore().is_err());
        let mut ck2 = MlpCheckpoint::capture(&model, 1);
        ck2.version = 99;
        assert!(ck2.restore().is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join("bdsg-checkpoint-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mlp.json");
        let model = MlpModel::build(&[2, 4, 2], Activation::Tanh, 3).unwrap();
        save_json(&MlpCheckpoint::capture(&model, 3), &path).unwrap();
        let back: MlpCheckpoint = load_json(&path).unwrap();
        assert_eq!(back.layer_widths, vec![2, 4, 2]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
