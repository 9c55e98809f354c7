//! Boundary generator: trains B(z) to emit samples on the support boundary
//! of a frozen density model.
//!
//! The compound loss per latent batch z_1..z_N against data x_1..x_M is
//!
//!   L = L0 + lambda1 * L1 + lambda2 * L2
//!
//!   L0 = mean_i  p(B(z_i))                      raw model probability
//!   L1 = mean_i  min_j ||B(z_i) - x_j||_2       distance to the data set
//!   L2 = mean_i  mean_{j != i}  ||z_i - z_j|| / (||B(z_i) - B(z_j)|| + eps)
//!
//! L0 pushes samples off the bulk, L1 keeps them near the data, and the
//! distance-ratio term L2 penalizes latent-space neighbors collapsing onto
//! one output, which is what breaks mode collapse.
//!
//! Gradients flow through B everywhere; for L0 they continue through the
//! density model's exact input gradient (for a flow: through the inverse
//! and the log-determinant). The nearest data point in L1 is selected per
//! sample, ties broken by lowest index, and only the selected pair carries
//! gradient.

use serde::{Deserialize, Serialize};

use crate::autodiff::mlp::{Activation, MlpModel};
use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::AdamOptimizer;
use crate::batch::Batch;
use crate::density::{clamped_probability, DensityModel, LOG_DENSITY_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::rng::{derive_seed, SplitMix64};

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_lr_decay() -> f64 {
    1.0
}

/// Hyper-parameters of one boundary-generator training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdsgHyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Sample size M: how many data points the run draws / expects.
    pub sample_size: usize,
    /// Latent batch size N <= M.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stabilizer in the L2 denominator; the ratio is undefined at output
    /// collisions without it.
    pub eps_div: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
}

impl Default for BdsgHyperparams {
    fn default() -> Self {
        BdsgHyperparams {
            lambda1: 0.3,
            lambda2: 0.025,
            sample_size: 1024,
            batch_size: 256,
            epochs: 3000,
            seed: 0,
            eps_div: 1e-8,
            learning_rate: 1e-3,
            lr_decay: 1.0,
        }
    }
}

impl BdsgHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size > self.sample_size {
            return Err(Error::config(format!(
                "batch size {} exceeds sample size {}",
                self.batch_size, self.sample_size
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch size must be at least 2"));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::config("lambda weights must be non-negative"));
        }
        if self.eps_div <= 0.0 {
            return Err(Error::config("eps_div must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch loss record; l1 and l2 are stored unweighted.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LossBreakdown {
    pub epoch: usize,
    pub total: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Trained boundary generator.
#[derive(Debug, Clone)]
pub struct BoundaryModel {
    network: MlpModel,
    latent_dim: usize,
    hyper: BdsgHyperparams,
    history: Vec<LossBreakdown>,
}

impl BoundaryModel {
    pub fn from_parts(
        network: MlpModel,
        hyper: BdsgHyperparams,
        history: Vec<LossBreakdown>,
    ) -> Result<BoundaryModel> {
        let latent_dim = network.input_dim();
        if network.output_dim() != latent_dim {
            return Err(Error::config(
                "boundary network must map the latent dimension to itself",
            ));
        }
        Ok(BoundaryModel {
            network,
            latent_dim,
            hyper,
            history,
        })
    }

    pub fn network(&self) -> &MlpModel {
        &self.network
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn hyper(&self) -> &BdsgHyperparams {
        &self.hyper
    }

    pub fn history(&self) -> &[LossBreakdown] {
        &self.history
    }

    /// B applied to n fresh standard-normal latent draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Batch> {
        if n == 0 {
            return Err(Error::config("sample count must be at least 1"));
        }
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut z = vec![0.0; self.latent_dim];
        let mut out = Batch::empty(self.latent_dim);
        for _ in 0..n {
            rng.fill_normal(&mut z);
            out.push_row(&self.network.forward(&z));
        }
        Ok(out)
    }
}

/// Standard-normal latent batch of n rows, deterministic in the seed.
pub fn draw_latent_batch(dim: usize, n: usize, seed: u64) -> Batch {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut row = vec![0.0; dim];
    let mut out = Batch::empty(dim);
    for _ in 0..n {
        rng.fill_normal(&mut row);
        out.push_row(&row);
    }
    out
}

// ---------------------------------------------------------------------------
// Plain (value-only) loss terms
// ---------------------------------------------------------------------------

/// Mean raw probability of B(z) under the density model, floor-clamped.
pub fn loss_l0(density: &dyn DensityModel, b: &BoundaryModel, z_batch: &Batch) -> Result<f64> {
    if z_batch.is_empty() {
        return Err(Error::config("empty latent batch"));
    }
    let mut acc = 0.0;
    for (i, z) in z_batch.rows().enumerate() {
        let x = b.network.forward(z);
        let ld = density.log_density(&x).map_err(|e| e.with_sample(i))?;
        acc += clamped_probability(ld);
    }
    Ok(acc / z_batch.len() as f64)
}

/// Mean distance from B(z_i) to its nearest data point.
pub fn loss_l1(b: &BoundaryModel, z_batch: &Batch, data: &Batch) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::config("empty data set in distance-to-set loss"));
    }
    if z_batch.is_empty() {
        return Err(Error::config("empty latent batch"));
    }
    let mut acc = 0.0;
    for z in z_batch.rows() {
        let x = b.network.forward(z);
        let (_, d) = nearest_row(&x, data);
        acc += d;
    }
    Ok(acc / z_batch.len() as f64)
}

/// Mean latent/output distance ratio over ordered pairs.
pub fn loss_l2(b: &BoundaryModel, z_batch: &Batch, eps_div: f64) -> Result<f64> {
    let n = z_batch.len();
    if n < 2 {
        return Err(Error::config("dispersion loss needs at least 2 samples"));
    }
    let outputs: Vec<Vec<f64>> = z_batch.rows().map(|z| b.network.forward(z)).collect();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let num = dist2(z_batch.row(i), z_batch.row(j));
            let den = dist2(&outputs[i], &outputs[j]) + eps_div;
            acc += num / den;
        }
    }
    Ok(acc * 2.0 / (n as f64 * (n - 1) as f64))
}

/// Full compound loss, value-only.
pub fn bdsg_loss(
    density: &dyn DensityModel,
    b: &BoundaryModel,
    z_batch: &Batch,
    data: &Batch,
    hp: &BdsgHyperparams,
) -> Result<LossBreakdown> {
    let l0 = loss_l0(density, b, z_batch)?;
    let l1 = loss_l1(b, z_batch, data)?;
    let l2 = loss_l2(b, z_batch, hp.eps_div)?;
    Ok(LossBreakdown {
        epoch: 0,
        total: l0 + hp.lambda1 * l1 + hp.lambda2 * l2,
        l0,
        l1,
        l2,
    })
}

fn nearest_row(x: &[f64], data: &Batch) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (j, row) in data.rows().enumerate() {
        let d = dist2(x, row);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

impl Error {
    fn with_sample(self, index: usize) -> Error {
        match self {
            Error::Inversion { residual, iters } => Error::Config(format!(
                "density evaluation failed at sample {index}: inversion did not \
                 converge after {iters} iterations (residual {residual:.3e})"
            )),
            other => other,
        }
    }
}

// ---------------------------------------------------------------------------
// Taped loss and training
// ---------------------------------------------------------------------------

struct TapedLoss {
    total: Var,
    l0: Var,
    l1: Var,
    l2: Var,
}

/// Builds the full compound loss on the tape. The latent batch enters as
/// constants; only B's parameters are differentiated.
fn build_loss_on_tape(
    tape: &mut Tape,
    density: &dyn DensityModel,
    network: &MlpModel,
    params: &[Var],
    z_batch: &Batch,
    data: &Batch,
    hp: &BdsgHyperparams,
) -> Result<TapedLoss> {
    let n = z_batch.len();
    let d = z_batch.dim();
    // forward all samples through B
    let mut outputs: Vec<Vec<Var>> = Vec::with_capacity(n);
    let mut output_values: Vec<Vec<f64>> = Vec::with_capacity(n);
    for z in z_batch.rows() {
        let z_vars: Vec<Var> = z.iter().map(|&v| tape.constant(v)).collect();
        let out = network.forward_on_tape(tape, params, &z_vars);
        output_values.push(out.iter().map(|&o| tape.value(o)).collect());
        outputs.push(out);
    }
    // L0: raw probability through the density's exact input gradient
    let mut p_terms = Vec::with_capacity(n);
    for i in 0..n {
        let (ld, grad) = density
            .log_density_grad(&output_values[i])
            .map_err(|e| e.with_sample(i))?;
        let ld_var = if ld < LOG_DENSITY_FLOOR {
            tape.constant(LOG_DENSITY_FLOOR)
        } else {
            tape.custom(&outputs[i], ld, &grad)
        };
        p_terms.push(tape.exp(ld_var));
    }
    let p_sum = tape.sum(&p_terms);
    let l0 = tape.mul_const(p_sum, 1.0 / n as f64);
    // L1: distance to the selected nearest data point
    let mut d_terms = Vec::with_capacity(n);
    for i in 0..n {
        let (j, _) = nearest_row(&output_values[i], data);
        let x_vars: Vec<Var> = data.row(j).iter().map(|&v| tape.constant(v)).collect();
        d_terms.push(tape.distance(&outputs[i], &x_vars));
    }
    let d_sum = tape.sum(&d_terms);
    let l1 = tape.mul_const(d_sum, 1.0 / n as f64);
    // L2: latent/output distance ratios over unordered pairs, counted twice
    let mut r_terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let num = dist2(z_batch.row(i), z_batch.row(j));
            let den = tape.distance(&outputs[i], &outputs[j]);
            let den_eps = tape.add_const(den, hp.eps_div);
            let num_var = tape.constant(num);
            r_terms.push(tape.div(num_var, den_eps));
        }
    }
    let r_sum = tape.sum(&r_terms);
    let l2 = tape.mul_const(r_sum, 2.0 / (n as f64 * (n - 1) as f64));
    let _ = d;
    let w1 = tape.mul_const(l1, hp.lambda1);
    let w2 = tape.mul_const(l2, hp.lambda2);
    let partial = tape.add(l0, w1);
    let total = tape.add(partial, w2);
    Ok(TapedLoss { total, l0, l1, l2 })
}

/// Training failure carrying the last good model state and its history.
#[derive(Debug)]
pub struct BoundaryTrainError {
    pub cause: Error,
    pub partial: BoundaryModel,
}

impl From<BoundaryTrainError> for Error {
    fn from(e: BoundaryTrainError) -> Error {
        e.cause
    }
}

/// Trains B against a frozen density model. Every epoch draws a fresh
/// latent batch of size N, evaluates the compound loss, and applies one
/// optimizer step to B's parameters only.
pub fn train_boundary(
    density: &dyn DensityModel,
    data: &Batch,
    widths: &[usize],
    hp: &BdsgHyperparams,
) -> std::result::Result<BoundaryModel, BoundaryTrainError> {
    let fail = |cause: Error, network: MlpModel, history: Vec<LossBreakdown>| BoundaryTrainError {
        partial: BoundaryModel {
            latent_dim: network.input_dim(),
            network,
            hyper: hp.clone(),
            history,
        },
        cause,
    };
    let d = data.dim();
    let setup = || -> Result<MlpModel> {
        hp.validate()?;
        if hp.batch_size > data.len() {
            return Err(Error::config(format!(
                "latent batch size {} exceeds data size {}",
                hp.batch_size,
                data.len()
            )));
        }
        if density.dim() != d {
            return Err(Error::Shape {
                context: "density model dimension",
                expected: d,
                got: density.dim(),
            });
        }
        if widths.first() != Some(&d) || widths.last() != Some(&d) {
            return Err(Error::config(format!(
                "boundary network widths {widths:?} must start and end at dimension {d}"
            )));
        }
        MlpModel::build(widths, Activation::Tanh, derive_seed(hp.seed, "boundary-init"))
    };
    let mut network = match setup() {
        Ok(n) => n,
        Err(e) => {
            // construction failed before any trainable state existed
            return Err(BoundaryTrainError {
                cause: e,
                partial: BoundaryModel {
                    network: MlpModel::build(&[d.max(1), d.max(1)], Activation::Tanh, 0)
                        .expect("fallback network"),
                    latent_dim: d.max(1),
                    hyper: hp.clone(),
                    history: Vec::new(),
                },
            });
        }
    };
    let mut opt = AdamOptimizer::new(network.param_count()).with_learning_rate(hp.learning_rate);
    let mut history: Vec<LossBreakdown> = Vec::with_capacity(hp.epochs);
    let mut tape = Tape::new();
    for epoch in 0..hp.epochs {
        let z_batch = draw_latent_batch(
            d,
            hp.batch_size,
            derive_seed(hp.seed, &format!("boundary-epoch-{epoch}")),
        );
        tape.clear();
        let params = network.register_leaves(&mut tape);
        let loss =
            match build_loss_on_tape(&mut tape, density, &network, &params, &z_batch, data, hp) {
                Ok(l) => l,
                Err(e) => return Err(fail(e, network, history)),
            };
        let grads = match tape.backward(loss.total) {
            Ok(g) => g,
            Err(e) => return Err(fail(e, network, history)),
        };
        let flat_grads = grads.collect(&params);
        let mut flat = network.params_flat();
        if let Err(e) = opt.step(&mut flat, &flat_grads) {
            return Err(fail(e, network, history));
        }
        network
            .set_params_flat(&flat)
            .expect("parameter count is stable");
        history.push(LossBreakdown {
            epoch,
            total: tape.value(loss.total),
            l0: tape.value(loss.l0),
            l1: tape.value(loss.l1),
            l2: tape.value(loss.l2),
        });
        opt.learning_rate *= hp.lr_decay;
    }
    Ok(BoundaryModel {
        latent_dim: d,
        network,
        hyper: hp.clone(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{GaussianMixture, LOG_DENSITY_FLOOR};

    fn linear_boundary(scale: f64) -> BoundaryModel {
        let net = MlpModel::from_parts(
            vec![2, 2],
            Activation::Tanh,
            vec![vec![scale, 0.0, 0.0, scale]],
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap()
    }

    fn constant_boundary(target: &[f64]) -> BoundaryModel {
        let net = MlpModel::from_parts(
            vec![2, 2],
            Activation::Tanh,
            vec![vec![0.0; 4]],
            vec![target.to_vec()],
        )
        .unwrap();
        BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap()
    }

    #[test]
    fn l0_at_mode_of_standard_normal() {
        let density = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[0.0, 0.0]);
        let z = draw_latent_batch(2, 16, 3);
        let l0 = loss_l0(&density, &b, &z).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((l0 - peak).abs() < 1e-12, "{l0} vs {peak}");
    }

    #[test]
    fn l0_far_tail_is_tiny() {
        let density = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[25.0, 0.0]);
        let z = draw_latent_batch(2, 8, 3);
        let l0 = loss_l0(&density, &b, &z).unwrap();
        assert!(l0 < 1e-80, "{l0}");
    }

    #[test]
    fn l1_unit_distance_to_single_point() {
        let b = constant_boundary(&[0.0, 0.0]);
        let z = draw_latent_batch(2, 4, 9);
        let data = Batch::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let l1 = loss_l1(&b, &z, &data).unwrap();
        assert!((l1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_nearest_assignment_split() {
        // B outputs (1,0) and (9,0); data at (0,0) and (10,0): each picks its
        // nearest, mean distance 1.
        let data = Batch::from_rows(&[vec![0.0, 0.0], vec![10.0, 0.0]]).unwrap();
        let z = Batch::from_rows(&[vec![1.0, 0.0], vec![9.0, 0.0]]).unwrap();
        let b = linear_boundary(1.0); // tanh-free single linear layer: identity
        let l1 = loss_l1(&b, &z, &data).unwrap();
        assert!((l1 - 1.0).abs() < 1e-12, "{l1}");
    }

    #[test]
    fn l1_zero_when_outputs_coincide_with_data() {
        let data = Batch::from_rows(&[vec![0.25, -0.5]]).unwrap();
        let b = constant_boundary(&[0.25, -0.5]);
        let z = draw_latent_batch(2, 4, 11);
        assert_eq!(loss_l1(&b, &z, &data).unwrap(), 0.0);
    }

    #[test]
    fn l2_identity_map_is_one() {
        let b = linear_boundary(1.0);
        let z = draw_latent_batch(2, 16, 5);
        let l2 = loss_l2(&b, &z, 1e-8).unwrap();
        assert!((l2 - 1.0).abs() < 1e-6, "{l2}");
    }

    #[test]
    fn l2_double_map_is_half() {
        let b = linear_boundary(2.0);
        let z = draw_latent_batch(2, 16, 5);
        let l2 = loss_l2(&b, &z, 1e-8).unwrap();
        assert!((l2 - 0.5).abs() < 1e-6, "{l2}");
    }

    #[test]
    fn l2_scale_covariance() {
        let z = draw_latent_batch(2, 12, 31);
        let l2_base = loss_l2(&linear_boundary(1.0), &z, 1e-12).unwrap();
        for c in [0.5, 2.0, 5.0] {
            let l2_scaled = loss_l2(&linear_boundary(c), &z, 1e-12).unwrap();
            assert!(
                (l2_scaled - l2_base / c).abs() < 1e-9,
                "c={c}: {l2_scaled} vs {}",
                l2_base / c
            );
        }
    }

    #[test]
    fn l2_mode_collapse_blows_up() {
        let b = constant_boundary(&[1.0, 1.0]);
        let z = draw_latent_batch(2, 8, 13);
        let eps = 1e-8;
        let l2 = loss_l2(&b, &z, eps).unwrap();
        // oracle: direct double loop over latent distances
        let n = z.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += dist2(z.row(i), z.row(j)) / eps;
                }
            }
        }
        let oracle = acc / (n as f64 * (n - 1) as f64);
        assert!((l2 - oracle).abs() / oracle < 1e-12);
        assert!(l2 > 1e6);
    }

    #[test]
    fn bdsg_loss_weighted_sum() {
        let density = GaussianMixture::standard_normal(2);
        let b = linear_boundary(1.0);
        let z = draw_latent_batch(2, 8, 17);
        let data = GaussianMixture::standard_normal(2).sample(32, 3);
        let hp = BdsgHyperparams {
            lambda1: 0.3,
            lambda2: 0.025,
            batch_size: 8,
            sample_size: 32,
            ..Default::default()
        };
        let bd = bdsg_loss(&density, &b, &z, &data, &hp).unwrap();
        let recomputed = bd.l0 + 0.3 * bd.l1 + 0.025 * bd.l2;
        assert!((bd.total - recomputed).abs() < 1e-10);
        // lambda = 0 collapses to l0
        let hp0 = BdsgHyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            ..hp
        };
        let bd0 = bdsg_loss(&density, &b, &z, &data, &hp0).unwrap();
        assert_eq!(bd0.total, bd0.l0);
    }

    #[test]
    fn paper_lambda_weighting_spot_value() {
        // components (0.007, 1.0, 1.0) with lambda1=0.3, lambda2=0.025 -> 0.332
        let total: f64 = 0.007 + 0.3 * 1.0 + 0.025 * 1.0;
        assert!((total - 0.332).abs() < 1e-12);
    }

    #[test]
    fn taped_loss_matches_plain_loss() {
        let density = GaussianMixture::standard_normal(2);
        let network = MlpModel::build(&[2, 4, 2], Activation::Tanh, 7).unwrap();
        let b = BoundaryModel::from_parts(network.clone(), BdsgHyperparams::default(), Vec::new())
            .unwrap();
        let z = draw_latent_batch(2, 6, 23);
        let data = GaussianMixture::standard_normal(2).sample(16, 5);
        let hp = BdsgHyperparams {
            batch_size: 6,
            sample_size: 16,
            ..Default::default()
        };
        let plain = bdsg_loss(&density, &b, &z, &data, &hp).unwrap();
        let mut tape = Tape::new();
        let params = network.register_leaves(&mut tape);
        let taped =
            build_loss_on_tape(&mut tape, &density, &network, &params, &z, &data, &hp).unwrap();
        assert!((tape.value(taped.total) - plain.total).abs() < 1e-12);
        assert!((tape.value(taped.l0) - plain.l0).abs() < 1e-12);
        assert!((tape.value(taped.l1) - plain.l1).abs() < 1e-12);
        assert!((tape.value(taped.l2) - plain.l2).abs() < 1e-12);
        // additivity of the taped scalar
        let recomputed = tape.value(taped.l0)
            + hp.lambda1 * tape.value(taped.l1)
            + hp.lambda2 * tape.value(taped.l2);
        assert!((tape.value(taped.total) - recomputed).abs() < 1e-10);
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        // tiny model per the numeric property suite: widths [2,4,2], N=4, M=8
        let density = GaussianMixture::standard_normal(2);
        let network = MlpModel::build(&[2, 4, 2], Activation::Tanh, 29).unwrap();
        let z = draw_latent_batch(2, 4, 41);
        let data = GaussianMixture::standard_normal(2).sample(8, 43);
        let hp = BdsgHyperparams {
            batch_size: 4,
            sample_size: 8,
            ..Default::default()
        };
        let mut tape = Tape::new();
        let params = network.register_leaves(&mut tape);
        let taped =
            build_loss_on_tape(&mut tape, &density, &network, &params, &z, &data, &hp).unwrap();
        let grads = tape.backward(taped.total).unwrap().collect(&params);
        let flat = network.params_flat();
        let h = 1e-5;
        let eval = |p: &[f64]| -> f64 {
            let mut net = network.clone();
            net.set_params_flat(p).unwrap();
            let b = BoundaryModel::from_parts(net, hp.clone(), Vec::new()).unwrap();
            bdsg_loss(&density, &b, &z, &data, &hp).unwrap().total
        };
        let mut max_rel = 0.0f64;
        for i in 0..flat.len() {
            let mut pp = flat.clone();
            let mut pm = flat.clone();
            pp[i] += h;
            pm[i] -= h;
            let fd = (eval(&pp) - eval(&pm)) / (2.0 * h);
            let denom = fd.abs().max(1e-6);
            max_rel = max_rel.max(((grads[i] - fd) / denom).abs());
        }
        assert!(max_rel < 1e-3, "max relative error {max_rel}");
    }

    #[test]
    fn sample_boundary_contract() {
        let b = linear_boundary(1.0);
        assert!(b.sample(0, 1).is_err());
        let s1 = b.sample(16, 9).unwrap();
        let s2 = b.sample(16, 9).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 16);
    }

    #[test]
    fn train_reduces_loss_on_tiny_run() {
        let density = GaussianMixture::standard_normal(2);
        let data = density.sample(64, 3);
        let hp = BdsgHyperparams {
            sample_size: 64,
            batch_size: 16,
            epochs: 60,
            seed: 5,
            learning_rate: 5e-3,
            ..Default::default()
        };
        let b = train_boundary(&density, &data, &[2, 8, 2], &hp).unwrap();
        let first = b.history().first().unwrap().total;
        let last = b.history().last().unwrap().total;
        assert!(last < first, "{first} -> {last}");
        assert_eq!(b.history().len(), 60);
    }

    #[test]
    fn train_rejects_bad_config() {
        let density = GaussianMixture::standard_normal(2);
        let data = density.sample(8, 3);
        let hp = BdsgHyperparams {
            sample_size: 8,
            batch_size: 16, // N > M
            ..Default::default()
        };
        let err = train_boundary(&density, &data, &[2, 4, 2], &hp);
        assert!(err.is_err());
        assert!(matches!(err.unwrap_err().cause, Error::Config(_)));
    }

    #[test]
    fn clamp_floor_keeps_probability_positive() {
        assert!(clamped_probability(LOG_DENSITY_FLOOR - 500.0) > 0.0);
    }
}
