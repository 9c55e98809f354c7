//! Minimal dense-network engine: reverse-mode tape, forward-mode derivative
//! propagation, adaptive-moment optimization, and spectral normalization.

pub mod adam;
pub mod mlp;
pub mod spectral;
pub mod tape;

pub use adam::AdamOptimizer;
pub use mlp::{Activation, DenseLayer, MlpModel, MlpScratch};
pub use spectral::{normalize_in_place, power_iteration, spectral_normalize};
pub use tape::{Gradients, Tape, Var};
