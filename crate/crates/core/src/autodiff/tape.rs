//! Reverse-mode automatic differentiation on a scalar operation tape.
//!
//! The tape is a Wengert list: every scalar operation appends one node with
//! its inputs and result value. [`Tape::backward`] replays the list in
//! reverse, accumulating adjoints by the chain rule. Gradients of parameters
//! that do not influence the loss are exactly zero.
//!
//! Besides primitive arithmetic, the tape supports [`Tape::custom`] nodes:
//! a scalar whose value and local partial derivatives were computed outside
//! the tape. Density evaluations route their exact input gradients through
//! such nodes, so training losses stay differentiable end to end without
//! recording the density internals.

use crate::error::{Error, Result};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    /// a * b + c in one node; the workhorse of dense layers.
    MulAdd(u32, u32, u32),
    Div(u32, u32),
    Neg(u32),
    Exp(u32),
    Ln(u32),
    Sqrt(u32),
    Abs(u32),
    Tanh(u32),
    Softplus(u32),
    Sigmoid(u32),
    Elu(u32),
    AddConst(u32),
    MulConst(u32, f64),
    /// Opaque scalar with precomputed partials stored in `custom_partials`.
    Custom {
        start: u32,
        len: u32,
    },
}

#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<f64>,
    custom_partials: Vec<(u32, f64)>,
}

fn stable_softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    /// Drops all nodes but keeps allocations for reuse across epochs.
    pub fn clear(&mut self) {
        self.ops.clear();
        self.values.clear();
        self.custom_partials.clear();
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0 as usize]
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.values.push(value);
        Var(id)
    }

    /// Differentiable input (parameter or data entry point).
    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Non-differentiable constant.
    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a.0, b.0), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a.0, b.0), v)
    }

    pub fn mul_add(&mut self, a: Var, b: Var, c: Var) -> Var {
        let v = self.value(a) * self.value(b) + self.value(c);
        self.push(Op::MulAdd(a.0, b.0, c.0), v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(Op::Div(a.0, b.0), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg(a.0), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(Op::Exp(a.0), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.push(Op::Ln(a.0), v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).sqrt();
        self.push(Op::Sqrt(a.0), v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).abs();
        self.push(Op::Abs(a.0), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).tanh();
        self.push(Op::Tanh(a.0), v)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = stable_softplus(self.value(a));
        self.push(Op::Softplus(a.0), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = stable_sigmoid(self.value(a));
        self.push(Op::Sigmoid(a.0), v)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = if x > 0.0 { x } else { x.exp() - 1.0 };
        self.push(Op::Elu(a.0), v)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(Op::AddConst(a.0), v)
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(Op::MulConst(a.0, c), v)
    }

    /// Sum of a slice of vars (pairwise left fold).
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars {
            [] => self.constant(0.0),
            [single] => *single,
            [first, rest @ ..] => {
                let mut acc = *first;
                for v in rest {
                    acc = self.add(acc, *v);
                }
                acc
            }
        }
    }

    /// Euclidean norm of the difference of two var slices: ||a - b||_2.
    pub fn distance(&mut self, a: &[Var], b: &[Var]) -> Var {
        debug_assert_eq!(a.len(), b.len());
        let mut terms = Vec::with_capacity(a.len());
        for (&ai, &bi) in a.iter().zip(b) {
            let d = self.sub(ai, bi);
            terms.push(self.mul(d, d));
        }
        let ss = self.sum(&terms);
        self.sqrt(ss)
    }

    /// Scalar with externally computed value and partials d value / d input.
    pub fn custom(&mut self, inputs: &[Var], value: f64, partials: &[f64]) -> Var {
        debug_assert_eq!(inputs.len(), partials.len());
        let start = self.custom_partials.len() as u32;
        for (v, p) in inputs.iter().zip(partials) {
            self.custom_partials.push((v.0, *p));
        }
        self.push(
            Op::Custom {
                start,
                len: inputs.len() as u32,
            },
            value,
        )
    }

    /// Adjoints of every node with respect to the scalar `loss`.
    ///
    /// Read a parameter's gradient by indexing the result with its leaf Var.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_finite() {
            return Err(Error::Numeric {
                context: "loss",
                value: loss_value,
            });
        }
        let mut adj = vec![0.0f64; self.ops.len()];
        adj[loss.0 as usize] = 1.0;
        for id in (0..=loss.0 as usize).rev() {
            let a = adj[id];
            if a == 0.0 {
                continue;
            }
            match self.ops[id] {
                Op::Leaf | Op::Const => {}
                Op::Add(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] += a;
                }
                Op::Sub(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] -= a;
                }
                Op::Mul(x, y) => {
                    adj[x as usize] += a * self.values[y as usize];
                    adj[y as usize] += a * self.values[x as usize];
                }
                Op::MulAdd(x, y, z) => {
                    adj[x as usize] += a * self.values[y as usize];
                    adj[y as usize] += a * self.values[x as usize];
                    adj[z as usize] += a;
                }
                Op::Div(x, y) => {
                    let yv = self.values[y as usize];
                    adj[x as usize] += a / yv;
                    adj[y as usize] -= a * self.values[id] / yv;
                }
                Op::Neg(x) => adj[x as usize] -= a,
                Op::Exp(x) => adj[x as usize] += a * self.values[id],
                Op::Ln(x) => adj[x as usize] += a / self.values[x as usize],
                Op::Sqrt(x) => {
                    let out = self.values[id];
                    if out > 0.0 {
                        adj[x as usize] += a * 0.5 / out;
                    }
                }
                Op::Abs(x) => {
                    let xv = self.values[x as usize];
                    adj[x as usize] += a * if xv > 0.0 { 1.0 } else if xv < 0.0 { -1.0 } else { 0.0 };
                }
                Op::Tanh(x) => {
                    let y = self.values[id];
                    adj[x as usize] += a * (1.0 - y * y);
                }
                Op::Softplus(x) => {
                    adj[x as usize] += a * stable_sigmoid(self.values[x as usize]);
                }
                Op::Sigmoid(x) => {
                    let y = self.values[id];
                    adj[x as usize] += a * y * (1.0 - y);
                }
                Op::Elu(x) => {
                    let xv = self.values[x as usize];
                    let d = if xv > 0.0 { 1.0 } else { self.values[id] + 1.0 };
                    adj[x as usize] += a * d;
                }
                Op::AddConst(x) => adj[x as usize] += a,
                Op::MulConst(x, c) => adj[x as usize] += a * c,
                Op::Custom { start, len } => {
                    for k in start..start + len {
                        let (input, partial) = self.custom_partials[k as usize];
                        adj[input as usize] += a * partial;
                    }
                }
            }
        }
        Ok(Gradients { adjoints: adj })
    }
}

/// Result of a backward pass.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> f64 {
        self.adjoints[v.0 as usize]
    }

    /// Gradients for a slice of leaves, in order.
    pub fn collect(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|v| self.wrt(*v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(3.0);
        let sq = t.mul(w, w);
        let g = t.backward(sq).unwrap();
        assert_eq!(g.wrt(w), 6.0);
    }

    #[test]
    fn unused_leaf_has_zero_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(3.0);
        let b = t.leaf(5.0);
        let loss = t.mul(w, w);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.wrt(b), 0.0);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let mut t = Tape::new();
        let a = t.leaf(0.0);
        let loss = t.ln(a); // -inf
        match t.backward(loss) {
            Err(Error::Numeric { value, .. }) => assert!(value.is_infinite()),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn division_rule() {
        let mut t = Tape::new();
        let a = t.leaf(6.0);
        let b = t.leaf(2.0);
        let q = t.div(a, b);
        let g = t.backward(q).unwrap();
        assert!((g.wrt(a) - 0.5).abs() < 1e-15);
        assert!((g.wrt(b) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn custom_node_routes_partials() {
        let mut t = Tape::new();
        let x = t.leaf(1.0);
        let y = t.leaf(2.0);
        // Pretend an external evaluation returned value 7 with gradient (3, -4).
        let c = t.custom(&[x, y], 7.0, &[3.0, -4.0]);
        let out = t.mul_const(c, 2.0);
        let g = t.backward(out).unwrap();
        assert_eq!(g.wrt(x), 6.0);
        assert_eq!(g.wrt(y), -8.0);
    }

    #[test]
    fn elementary_finite_difference_check() {
        // f(a, b) = exp(a) * tanh(b) + softplus(a * b) / sqrt(|b| + 2)
        let eval = |t: &mut Tape, a: Var, b: Var| {
            let ea = t.exp(a);
            let tb = t.tanh(b);
            let left = t.mul(ea, tb);
            let ab = t.mul(a, b);
            let sp = t.softplus(ab);
            let babs = t.abs(b);
            let shifted = t.add_const(babs, 2.0);
            let denom = t.sqrt(shifted);
            let right = t.div(sp, denom);
            t.add(left, right)
        };
        let f = |a: f64, b: f64| -> f64 {
            let mut t = Tape::new();
            let av = t.leaf(a);
            let bv = t.leaf(b);
            let out = eval(&mut t, av, bv);
            t.value(out)
        };
        let (a0, b0) = (0.37, -0.81);
        let mut t = Tape::new();
        let av = t.leaf(a0);
        let bv = t.leaf(b0);
        let out = eval(&mut t, av, bv);
        let g = t.backward(out).unwrap();
        let h = 1e-6;
        let fd_a = (f(a0 + h, b0) - f(a0 - h, b0)) / (2.0 * h);
        let fd_b = (f(a0, b0 + h) - f(a0, b0 - h)) / (2.0 * h);
        assert!((g.wrt(av) - fd_a).abs() < 1e-8, "{} vs {}", g.wrt(av), fd_a);
        assert!((g.wrt(bv) - fd_b).abs() < 1e-8, "{} vs {}", g.wrt(bv), fd_b);
    }
}
