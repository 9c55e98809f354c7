//! Density models behind one contract.
//!
//! Two interchangeable implementations of log p(x): the closed-form
//! Gaussian mixture used as ground truth on synthetic data, and the
//! trainable invertible residual flow. Anything that consumes a
//! [`DensityModel`] produces structurally identical results for both.

pub mod flow;
pub mod mixture;

pub use flow::{FlowModel, FlowTrainConfig};
pub use mixture::{GaussianMixture, MixtureComponent};

use crate::error::{Error, Result};

/// Log-densities below this are clamped before exponentiation so raw
/// probabilities never underflow to exactly zero where a loss needs them.
pub const LOG_DENSITY_FLOOR: f64 = -745.0;

/// Behavioral contract shared by the mixture and the flow.
pub trait DensityModel {
    fn dim(&self) -> usize;

    /// log p(x). For the flow this requires the inverse to converge at x.
    fn log_density(&self, x: &[f64]) -> Result<f64>;

    /// log p(x) together with its exact gradient in x.
    fn log_density_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Candidate locations of density maxima, when the model knows them.
    fn mode_hints(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// Probability with the floor clamp applied to the log-density first.
pub fn clamped_probability(log_density: f64) -> f64 {
    log_density.max(LOG_DENSITY_FLOOR).exp()
}

/// Density at x, mapping a failed flow inversion to zero probability:
/// a point the flow cannot reach carries no model mass.
pub fn probability_or_zero(model: &dyn DensityModel, x: &[f64]) -> Result<f64> {
    match model.log_density(x) {
        Ok(ld) => Ok(ld.exp()),
        Err(Error::Inversion { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Maximum density over the provided candidate points plus the model's own
/// mode hints. Points where the model is undefined contribute nothing.
pub fn peak_density<'a, I>(model: &dyn DensityModel, candidates: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut best: f64 = 0.0;
    for hint in model.mode_hints() {
        best = best.max(probability_or_zero(model, &hint)?);
    }
    for p in candidates {
        best = best.max(probability_or_zero(model, p)?);
    }
    if best <= 0.0 {
        return Err(Error::config(
            "peak density estimate is zero; no evaluable candidate points",
        ));
    }
    Ok(best)
}
