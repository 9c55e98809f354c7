//! Closed-form Gaussian mixture density.

use serde::{Deserialize, Serialize};

use super::DensityModel;
use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, solve_lower_transpose};
use crate::rng::SplitMix64;

/// One mixture component as it appears in the JSON spec document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major symmetric positive-definite matrix.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MixtureSpec {
    components: Vec<MixtureComponent>,
}

/// Validated mixture with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<MixtureComponent>,
    /// Lower Cholesky factor per component.
    chol: Vec<Vec<f64>>,
    /// log w_k - d/2 log(2 pi) - sum_i log L_ii per component.
    log_norm: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<GaussianMixture> {
        if components.is_empty() {
            return Err(Error::config("mixture needs at least one component"));
        }
        let dim = components[0].mean.len();
        if dim == 0 {
            return Err(Error::config("mixture dimension must be positive"));
        }
        let weight_sum: f64 = components.iter().map(|c| c.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "component weights sum to {weight_sum}, expected 1"
            )));
        }
        let mut chol = Vec::with_capacity(components.len());
        let mut log_norm = Vec::with_capacity(components.len());
        for (k, c) in components.iter().enumerate() {
            if c.weight <= 0.0 || c.weight > 1.0 {
                return Err(Error::config(format!(
                    "component {k} weight {} outside (0, 1]",
                    c.weight
                )));
            }
            if c.mean.len() != dim {
                return Err(Error::Shape {
                    context: "mixture mean",
                    expected: dim,
                    got: c.mean.len(),
                });
            }
            if c.covariance.len() != dim || c.covariance.iter().any(|r| r.len() != dim) {
                return Err(Error::config(format!(
                    "component {k} covariance is not {dim}x{dim}"
                )));
            }
            let mut flat = Vec::with_capacity(dim * dim);
            for row in &c.covariance {
                flat.extend_from_slice(row);
            }
            for i in 0..dim {
                for j in 0..i {
                    if (flat[i * dim + j] - flat[j * dim + i]).abs() > 1e-9 {
                        return Err(Error::config(format!(
                            "component {k} covariance is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
            let l = cholesky(&flat, dim)?;
            let log_det_half: f64 = (0..dim).map(|i| l[i * dim + i].ln()).sum();
            log_norm.push(
                c.weight.ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln()
                    - log_det_half,
            );
            chol.push(l);
        }
        Ok(GaussianMixture {
            dim,
            components,
            chol,
            log_norm,
        })
    }

    /// Single standard normal of the given dimension.
    pub fn standard_normal(dim: usize) -> GaussianMixture {
        let mut cov = vec![vec![0.0; dim]; dim];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        GaussianMixture::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0; dim],
            covariance: cov,
        }])
        .expect("standard normal is always valid")
    }

    /// Equal-weight isotropic mixture, for synthetic setups.
    pub fn isotropic(means: &[Vec<f64>], variance: f64) -> Result<GaussianMixture> {
        if means.is_empty() {
            return Err(Error::config("isotropic mixture needs at least one mean"));
        }
        let dim = means[0].len();
        let w = 1.0 / means.len() as f64;
        let comps = means
            .iter()
            .map(|m| {
                let mut cov = vec![vec![0.0; dim]; dim];
                for (i, row) in cov.iter_mut().enumerate() {
                    row[i] = variance;
                }
                MixtureComponent {
                    weight: w,
                    mean: m.clone(),
                    covariance: cov,
                }
            })
            .collect();
        GaussianMixture::new(comps)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn from_json(json: &str) -> Result<GaussianMixture> {
        let spec: MixtureSpec = serde_json::from_str(json)?;
        GaussianMixture::new(spec.components)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MixtureSpec {
            components: self.components.clone(),
        })
        .expect("mixture serialization cannot fail")
    }

    /// Per-component log( w_k N(x; mu_k, Sigma_k) ).
    fn component_log_terms(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let d = self.dim;
        let mut diff = vec![0.0; d];
        for (k, c) in self.components.iter().enumerate() {
            for (i, v) in diff.iter_mut().enumerate() {
                *v = x[i] - c.mean[i];
            }
            solve_lower(&self.chol[k], d, &mut diff);
            let maha: f64 = diff.iter().map(|v| v * v).sum();
            out.push(self.log_norm[k] - 0.5 * maha);
        }
    }

    /// Draws n points; component choice is multinomial in the weights.
    pub fn sample(&self, n: usize, seed: u64) -> Batch {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut out = Batch::empty(self.dim);
        let mut z = vec![0.0; self.dim];
        let mut row = vec![0.0; self.dim];
        for _ in 0..n {
            let r = rng.next_f64();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (k, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if r < acc {
                    pick = k;
                    break;
                }
            }
            rng.fill_normal(&mut z);
            let l = &self.chol[pick];
            let mean = &self.components[pick].mean;
            for i in 0..self.dim {
                let mut v = mean[i];
                for j in 0..=i {
                    v += l[i * self.dim + j] * z[j];
                }
                row[i] = v;
            }
            out.push_row(&row);
        }
        out
    }
}

impl DensityModel for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    /// log-sum-exp over components; finite for every finite x.
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                context: "mixture log_density",
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut terms = Vec::with_capacity(self.components.len());
        self.component_log_terms(x, &mut terms);
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Ok(super::LOG_DENSITY_FLOOR);
        }
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        Ok(max + sum.ln())
    }

    fn log_density_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let log_p = self.log_density(x)?;
        let d = self.dim;
        let mut terms = Vec::with_capacity(self.components.len());
        self.component_log_terms(x, &mut terms);
        let mut grad = vec![0.0; d];
        let mut diff = vec![0.0; d];
        for (k, c) in self.components.iter().enumerate() {
            let resp = (terms[k] - log_p).exp();
            if resp == 0.0 {
                continue;
            }
            for (i, v) in diff.iter_mut().enumerate() {
                *v = x[i] - c.mean[i];
            }
            // Sigma^-1 (x - mu) via the Cholesky factor
            solve_lower(&self.chol[k], d, &mut diff);
            solve_lower_transpose(&self.chol[k], d, &mut diff);
            for i in 0..d {
                grad[i] -= resp * diff[i];
            }
        }
        Ok((log_p, grad))
    }

    fn mode_hints(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.mean.clone()).collect()
    }
}
