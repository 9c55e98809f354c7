//! Bias-corrected adaptive-moment optimizer.

use crate::error::{Error, Result};

/// Optimizer state and hyper-parameters for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamOptimizer {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stab: f64,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamOptimizer {
    pub fn new(param_count: usize) -> AdamOptimizer {
        AdamOptimizer {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_stab: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        }
    }

    pub fn with_learning_rate(mut self, lr: f64) -> AdamOptimizer {
        self.learning_rate = lr;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    /// One update step. Parameters are untouched when any gradient is
    /// non-finite; moments have the same shape as the parameters.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::Shape {
                context: "adam parameters",
                expected: self.first_moment.len(),
                got: params.len(),
            });
        }
        if grads.len() != params.len() {
            return Err(Error::Shape {
                context: "adam gradients",
                expected: params.len(),
                got: grads.len(),
            });
        }
        if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numeric {
                context: "adam gradient",
                value: *bad,
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_stab);
        }
        Ok(())
    }
}
