//! Dense fully-connected networks with exact derivative propagation.
//!
//! One model type serves two roles: the boundary generator and the residual
//! sub-networks inside flow blocks. Hidden layers share one activation;
//! the output layer is linear.
//!
//! Derivatives come in four flavors, all exact:
//! - [`MlpModel::forward_on_tape`]: reverse mode through the tape (training).
//! - [`MlpModel::jvp`]: forward-mode directional derivative J(x)·v.
//! - [`MlpModel::forward_jacobian`]: full Jacobian via d forward passes.
//! - [`MlpModel::forward_order2`]: Jacobian plus the full second-derivative
//!   tensor, used for gradients of log-determinants.

use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Elu,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else if x < -30.0 {
                    x.exp()
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// First derivative expressed through the pre-activation x.
    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let y = x.tanh();
                1.0 - y * y
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Softplus => sigmoid(x),
        }
    }

    /// Second derivative through the pre-activation x.
    #[inline]
    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let y = x.tanh();
                -2.0 * y * (1.0 - y * y)
            }
            Activation::Elu => {
                if x > 0.0 {
                    0.0
                } else {
                    x.exp()
                }
            }
            Activation::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One dense layer, weight stored row-major (out_dim x in_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Fully-connected network with fixed layer widths.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<DenseLayer>,
}

/// Reusable forward-pass buffers for allocation-free hot loops.
#[derive(Debug, Default, Clone)]
pub struct MlpScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl MlpModel {
    /// Builds a network with weights drawn from N(0, 1/fan_in) and zero biases.
    /// The same seed always produces bit-identical parameters.
    pub fn build(widths: &[usize], activation: Activation, seed: u64) -> Result<MlpModel> {
        if widths.len() < 2 {
            return Err(Error::config(format!(
                "layer widths need at least input and output entries, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::config(format!(
                "layer widths must be positive, got {widths:?}"
            )));
        }
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let scale = 1.0 / (in_dim as f64).sqrt();
            let weight = (0..in_dim * out_dim)
                .map(|_| rng.next_normal() * scale)
                .collect();
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                weight,
                bias: vec![0.0; out_dim],
            });
        }
        Ok(MlpModel {
            widths: widths.to_vec(),
            activation,
            layers,
        })
    }

    /// Reassembles a model from checkpoint parts, enforcing shape invariants.
    pub fn from_parts(
        widths: Vec<usize>,
        activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<MlpModel> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::config(format!("invalid layer widths {widths:?}")));
        }
        if weights.len() != widths.len() - 1 || biases.len() != widths.len() - 1 {
            return Err(Error::config("layer count does not match widths"));
        }
        let mut layers = Vec::with_capacity(weights.len());
        for (i, (w, b)) in weights.into_iter().zip(biases).enumerate() {
            let (in_dim, out_dim) = (widths[i], widths[i + 1]);
            if w.len() != in_dim * out_dim {
                return Err(Error::Shape {
                    context: "layer weight",
                    expected: in_dim * out_dim,
                    got: w.len(),
                });
            }
            if b.len() != out_dim {
                return Err(Error::Shape {
                    context: "layer bias",
                    expected: out_dim,
                    got: b.len(),
                });
            }
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                weight: w,
                bias: b,
            });
        }
        Ok(MlpModel {
            widths,
            activation,
            layers,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Flat parameter vector: per layer, weight row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                context: "flat parameters",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let wn = l.weight.len();
            l.weight.copy_from_slice(&params[offset..offset + wn]);
            offset += wn;
            let bn = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + bn]);
            offset += bn;
        }
        Ok(())
    }

    /// Single-point forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = MlpScratch::default();
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut out, &mut scratch);
        out
    }

    /// Allocation-free forward pass for hot loops (fixed-point inversion).
    pub fn forward_into(&self, x: &[f64], out: &mut [f64], scratch: &mut MlpScratch) {
        debug_assert_eq!(x.len(), self.input_dim());
        debug_assert_eq!(out.len(), self.output_dim());
        let n_layers = self.layers.len();
        scratch.a.clear();
        scratch.a.extend_from_slice(x);
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            scratch.b.clear();
            scratch.b.resize(layer.out_dim, 0.0);
            for j in 0..layer.out_dim {
                let row = &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut acc = layer.bias[j];
                for (w, v) in row.iter().zip(scratch.a.iter()) {
                    acc += w * v;
                }
                scratch.b[j] = if last { acc } else { self.activation.apply(acc) };
            }
            std::mem::swap(&mut scratch.a, &mut scratch.b);
        }
        out.copy_from_slice(&scratch.a);
    }

    /// Batched forward pass with the public shape contract.
    pub fn forward_batch(&self, input: &crate::batch::Batch) -> Result<crate::batch::Batch> {
        if input.dim() != self.input_dim() {
            return Err(Error::Shape {
                context: "mlp forward input",
                expected: self.input_dim(),
                got: input.dim(),
            });
        }
        let mut scratch = MlpScratch::default();
        let mut out = crate::batch::Batch::empty(self.output_dim());
        let mut row_out = vec![0.0; self.output_dim()];
        for row in input.rows() {
            self.forward_into(row, &mut row_out, &mut scratch);
            out.push_row(&row_out);
        }
        Ok(out)
    }

    /// Exact Jacobian-vector product J(x)·v by forward-mode propagation.
    pub fn jvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "jvp input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if v.len() != x.len() {
            return Err(Error::Shape {
                context: "jvp direction",
                expected: x.len(),
                got: v.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut val: Vec<f64> = x.to_vec();
        let mut tan: Vec<f64> = v.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            let mut val_next = vec![0.0; layer.out_dim];
            let mut tan_next = vec![0.0; layer.out_dim];
            for j in 0..layer.out_dim {
                let row = &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut acc = layer.bias[j];
                let mut tacc = 0.0;
                for i in 0..layer.in_dim {
                    acc += row[i] * val[i];
                    tacc += row[i] * tan[i];
                }
                if last {
                    val_next[j] = acc;
                    tan_next[j] = tacc;
                } else {
                    val_next[j] = self.activation.apply(acc);
                    tan_next[j] = self.activation.deriv(acc) * tacc;
                }
            }
            val = val_next;
            tan = tan_next;
        }
        Ok(tan)
    }

    /// Output values and the full Jacobian (out_dim x in_dim, row-major).
    pub fn forward_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d_in = self.input_dim();
        let n_layers = self.layers.len();
        let mut val: Vec<f64> = x.to_vec();
        // jac[j * d_in + k] = d val_j / d x_k
        let mut jac: Vec<f64> = vec![0.0; d_in * d_in];
        for k in 0..d_in {
            jac[k * d_in + k] = 1.0;
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            let mut val_next = vec![0.0; layer.out_dim];
            let mut jac_next = vec![0.0; layer.out_dim * d_in];
            for j in 0..layer.out_dim {
                let row = &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut acc = layer.bias[j];
                for i in 0..layer.in_dim {
                    acc += row[i] * val[i];
                }
                let jrow = &mut jac_next[j * d_in..(j + 1) * d_in];
                for i in 0..layer.in_dim {
                    let w = row[i];
                    if w != 0.0 {
                        let src = &jac[i * d_in..(i + 1) * d_in];
                        for k in 0..d_in {
                            jrow[k] += w * src[k];
                        }
                    }
                }
                if last {
                    val_next[j] = acc;
                } else {
                    val_next[j] = self.activation.apply(acc);
                    let d = self.activation.deriv(acc);
                    for k in 0..d_in {
                        jrow[k] *= d;
                    }
                }
            }
            val = val_next;
            jac = jac_next;
        }
        (val, jac)
    }

    /// Values, Jacobian, and exact second derivatives.
    ///
    /// `hess[j]` is the in_dim x in_dim matrix of d² out_j / dx dx.
    pub fn forward_order2(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let d = self.input_dim();
        let n_layers = self.layers.len();
        let mut val: Vec<f64> = x.to_vec();
        let mut jac: Vec<f64> = vec![0.0; d * d];
        for k in 0..d {
            jac[k * d + k] = 1.0;
        }
        let mut hess: Vec<Vec<f64>> = vec![vec![0.0; d * d]; d];
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            let mut val_next = vec![0.0; layer.out_dim];
            let mut jac_next = vec![0.0; layer.out_dim * d];
            let mut hess_next = vec![vec![0.0; d * d]; layer.out_dim];
            for j in 0..layer.out_dim {
                let row = &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut acc = layer.bias[j];
                for i in 0..layer.in_dim {
                    acc += row[i] * val[i];
                }
                let jrow = &mut jac_next[j * d..(j + 1) * d];
                let hmat = &mut hess_next[j];
                for i in 0..layer.in_dim {
                    let w = row[i];
                    if w != 0.0 {
                        let src = &jac[i * d..(i + 1) * d];
                        for k in 0..d {
                            jrow[k] += w * src[k];
                        }
                        for (h, s) in hmat.iter_mut().zip(hess[i].iter()) {
                            *h += w * s;
                        }
                    }
                }
                if last {
                    val_next[j] = acc;
                } else {
                    val_next[j] = self.activation.apply(acc);
                    let d1 = self.activation.deriv(acc);
                    let d2 = self.activation.deriv2(acc);
                    // chain rule: h' = phi' * h + phi'' * g g^T, then g' = phi' * g
                    for a in 0..d {
                        for b in 0..d {
                            hmat[a * d + b] = d1 * hmat[a * d + b] + d2 * jrow[a] * jrow[b];
                        }
                    }
                    for g in jrow.iter_mut() {
                        *g *= d1;
                    }
                }
            }
            val = val_next;
            jac = jac_next;
            hess = hess_next;
        }
        (val, jac, hess)
    }

    /// Registers every parameter as a tape leaf; order matches [`Self::params_flat`].
    pub fn register_leaves(&self, tape: &mut Tape) -> Vec<Var> {
        let mut vars = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for &w in &l.weight {
                vars.push(tape.leaf(w));
            }
            for &b in &l.bias {
                vars.push(tape.leaf(b));
            }
        }
        vars
    }

    /// Forward pass with inputs and parameters as tape nodes.
    ///
    /// `params` must come from [`Self::register_leaves`] on the same tape.
    pub fn forward_on_tape(&self, tape: &mut Tape, params: &[Var], x: &[Var]) -> Vec<Var> {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(x.len(), self.input_dim());
        let n_layers = self.layers.len();
        let mut vals: Vec<Var> = x.to_vec();
        let mut offset = 0;
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            let w_vars = &params[offset..offset + layer.weight.len()];
            offset += layer.weight.len();
            let b_vars = &params[offset..offset + layer.bias.len()];
            offset += layer.bias.len();
            let mut next = Vec::with_capacity(layer.out_dim);
            for j in 0..layer.out_dim {
                let mut acc = b_vars[j];
                for i in 0..layer.in_dim {
                    acc = tape.mul_add(w_vars[j * layer.in_dim + i], vals[i], acc);
                }
                next.push(if last {
                    acc
                } else {
                    match self.activation {
                        Activation::Tanh => tape.tanh(acc),
                        Activation::Elu => tape.elu(acc),
                        Activation::Softplus => tape.softplus(acc),
                    }
                });
            }
            vals = next;
        }
        vals
    }

    /// Taped forward pass together with the taped Jacobian w.r.t. the inputs.
    ///
    /// Tangent arithmetic is expressed in tape operations, so reverse mode
    /// over the returned Jacobian entries yields exact second derivatives.
    /// Returns (outputs, jacobian entries row-major out_dim x in_dim).
    pub fn forward_jacobian_on_tape(
        &self,
        tape: &mut Tape,
        params: &[Var],
        x: &[Var],
    ) -> (Vec<Var>, Vec<Var>) {
        let d = self.input_dim();
        let n_layers = self.layers.len();
        let mut vals: Vec<Var> = x.to_vec();
        // tans[k] = d vals / d x_k; None marks a structural zero.
        let mut tans: Vec<Vec<Option<Var>>> = (0..d)
            .map(|k| {
                (0..d)
                    .map(|i| if i == k { Some(tape.constant(1.0)) } else { None })
                    .collect()
            })
            .collect();
        let mut offset = 0;
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            let w_vars = &params[offset..offset + layer.weight.len()];
            offset += layer.weight.len();
            let b_vars = &params[offset..offset + layer.bias.len()];
            offset += layer.bias.len();
            let mut next_vals = Vec::with_capacity(layer.out_dim);
            let mut next_tans: Vec<Vec<Option<Var>>> = vec![Vec::with_capacity(layer.out_dim); d];
            for j in 0..layer.out_dim {
                let mut acc = b_vars[j];
                for i in 0..layer.in_dim {
                    acc = tape.mul_add(w_vars[j * layer.in_dim + i], vals[i], acc);
                }
                let mut tan_accs: Vec<Option<Var>> = vec![None; d];
                for k in 0..d {
                    let mut tacc: Option<Var> = None;
                    for i in 0..layer.in_dim {
                        if let Some(t) = tans[k][i] {
                            let w = w_vars[j * layer.in_dim + i];
                            // First tangent layer multiplies the identity seed;
                            // the weight var itself is the product.
                            tacc = Some(match (tacc, li) {
                                (None, 0) => w,
                                (None, _) => tape.mul(w, t),
                                (Some(a), 0) => tape.add(a, w),
                                (Some(a), _) => tape.mul_add(w, t, a),
                            });
                        }
                    }
                    tan_accs[k] = tacc;
                }
                if last {
                    next_vals.push(acc);
                    for k in 0..d {
                        next_tans[k].push(tan_accs[k]);
                    }
                } else {
                    let (y, dphi) = match self.activation {
                        Activation::Tanh => {
                            let y = tape.tanh(acc);
                            let y2 = tape.mul(y, y);
                            let neg = tape.neg(y2);
                            let dphi = tape.add_const(neg, 1.0);
                            (y, dphi)
                        }
                        Activation::Softplus => {
                            let y = tape.softplus(acc);
                            let dphi = tape.sigmoid(acc);
                            (y, dphi)
                        }
                        Activation::Elu => {
                            let y = tape.elu(acc);
                            // derivative is exp(acc) = y + 1 for acc <= 0, else 1
                            let dphi = if tape.value(acc) > 0.0 {
                                tape.constant(1.0)
                            } else {
                                tape.add_const(y, 1.0)
                            };
                            (y, dphi)
                        }
                    };
                    next_vals.push(y);
                    for k in 0..d {
                        next_tans[k].push(tan_accs[k].map(|t| tape.mul(dphi, t)));
                    }
                }
            }
            vals = next_vals;
            tans = next_tans;
        }
        let zero = tape.constant(0.0);
        let out_dim = self.output_dim();
        let mut jac = Vec::with_capacity(out_dim * d);
        for j in 0..out_dim {
            for k in 0..d {
                jac.push(tans[k][j].unwrap_or(zero));
            }
        }
        (vals, jac)
    }
}
