//! Support-boundary sample generation and anomaly detection.
//!
//! The pipeline has two stages. A density model of "normal" data is either
//! a closed-form Gaussian mixture or an invertible residual flow trained by
//! maximum likelihood with exact change-of-variables densities. A boundary
//! generator is then trained against that frozen density with a compound
//! loss that pushes samples onto the support boundary: a raw-probability
//! term, a distance-to-set term, and a latent/output distance-ratio term
//! that prevents mode collapse. On top of the two models sit anomaly
//! classification, strong-anomaly generation, loss-based OoD scoring, and
//! grid/boundary-precision evaluation.

pub mod anomaly;
pub mod autodiff;
pub mod batch;
pub mod boundary;
pub mod checkpoint;
pub mod density;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod rng;

pub use autodiff::{Activation, AdamOptimizer, MlpModel, Tape, Var};
pub use batch::Batch;
pub use error::{Error, Result};
