//! Multilayer perceptrons with exact reverse-mode gradients, plus Adam.
//!
//! An [`Mlp`] applies rectified-linear units after every hidden layer and
//! leaves the final layer linear. Weights are fan-in-scaled uniform at
//! initialization, biases zero, so construction is fully determined by the
//! seed stream. Three evaluation paths share the same affine kernel:
//! single-vector [`Mlp::forward`], gemm-backed [`Mlp::forward_batch`], and
//! the tape path [`Mlp::forward_tape`] used to build training losses.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tape::{Gradients, NodeId, Tape};

#[derive(Debug, Clone)]
pub struct Mlp<S: Scalar> {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<S>>,
    biases: Vec<Array1<S>>,
}

/// Tape bindings for one [`Mlp`]: parameter leaf ids, reusable for every
/// sample on the same tape.
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
}

/// Parameter-shaped gradient arrays for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads<S: Scalar> {
    pub weights: Vec<Array2<S>>,
    pub biases: Vec<Array1<S>>,
}

impl<S: Scalar> Mlp<S> {
    /// Fan-in-scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// zero biases.
    pub fn new(layer_sizes: &[usize], rng: &mut RngStream) -> Self {
        assert!(
            layer_sizes.len() >= 2,
            "an Mlp needs at least input and output sizes"
        );
        assert!(
            layer_sizes.iter().all(|&n| n > 0),
            "layer sizes must be positive"
        );
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                S::from_f64(rng.uniform_in(-bound, bound))
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        }
    }

    /// All-zero parameters; forward output is identically zero.
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        assert!(layer_sizes.len() >= 2);
        let weights = layer_sizes
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = layer_sizes.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Sum over layers of `(fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|p| (p[0] + 1) * p[1])
            .sum()
    }

    pub fn weight(&self, layer: usize) -> &Array2<S> {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &Array1<S> {
        &self.biases[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Array2<S> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<S> {
        &mut self.biases[layer]
    }

    /// Last-layer-linear forward pass; hidden layers rectified.
    pub fn forward(&self, input: &Array1<S>) -> Result<Array1<S>> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("mlp forward", self.input_dim(), input.len()));
        }
        let last = self.weights.len() - 1;
        let mut h = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            let mut y = w.dot(&h) + b;
            if i < last {
                y.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
            }
            h = y;
        }
        Ok(h)
    }

    /// Row-batched forward: `inputs` is `(n, input_dim)`, output `(n, output_dim)`.
    pub fn forward_batch(&self, inputs: &Array2<S>) -> Result<Array2<S>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape("mlp forward_batch", self.input_dim(), inputs.ncols()));
        }
        let last = self.weights.len() - 1;
        let mut h = inputs.clone();
        for (i, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            let mut y = h.dot(&w.t());
            y += b;
            if i < last {
                y.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
            }
            h = y;
        }
        Ok(h)
    }

    /// Registers this net's parameters as leaves on `tape`.
    pub fn bind(&self, tape: &mut Tape<S>) -> MlpVars {
        let weights = self.weights.iter().map(|w| tape.leaf_mat(w.clone())).collect();
        let biases = self.biases.iter().map(|b| tape.leaf_vec(b.clone())).collect();
        MlpVars { weights, biases }
    }

    /// Forward pass through bound parameters; differentiable w.r.t. both the
    /// parameters and `input`.
    pub fn forward_tape(&self, tape: &mut Tape<S>, vars: &MlpVars, input: NodeId) -> NodeId {
        let last = vars.weights.len() - 1;
        let mut h = input;
        for i in 0..vars.weights.len() {
            let wx = tape.matvec(vars.weights[i], h);
            let y = tape.add(wx, vars.biases[i]);
            h = if i < last { tape.relu(y) } else { y };
        }
        h
    }

    /// Extracts this net's gradients from a completed backward sweep.
    pub fn grads_from(&self, grads: &Gradients<S>, vars: &MlpVars) -> MlpGrads<S> {
        MlpGrads {
            weights: vars.weights.iter().map(|&id| grads.mat(id).clone()).collect(),
            biases: vars.biases.iter().map(|&id| grads.vec(id).clone()).collect(),
        }
    }

    pub fn zero_grads(&self) -> MlpGrads<S> {
        MlpGrads {
            weights: self
                .weights
                .iter()
                .map(|w| Array2::zeros((w.nrows(), w.ncols())))
                .collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    fn shapes_match(&self, g: &MlpGrads<S>) -> bool {
        g.weights.len() == self.weights.len()
            && g.biases.len() == self.biases.len()
            && self
                .weights
                .iter()
                .zip(&g.weights)
                .all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&g.biases).all(|(a, b)| a.len() == b.len())
    }

    /// Hard copy of another net's parameters (shapes must match).
    pub fn copy_from(&mut self, other: &Mlp<S>) {
        assert_eq!(self.layer_sizes, other.layer_sizes, "copy_from shape mismatch");
        self.weights.clone_from(&other.weights);
        self.biases.clone_from(&other.biases);
    }

    /// `self = (1 - tau) * self + tau * other`.
    pub fn blend_from(&mut self, other: &Mlp<S>, tau: S) {
        assert_eq!(self.layer_sizes, other.layer_sizes, "blend_from shape mismatch");
        let keep = S::one() - tau;
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.zip_mut_with(b, |x, &y| *x = keep * *x + tau * y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.zip_mut_with(b, |x, &y| *x = keep * *x + tau * y);
        }
    }
}

/// Adam with bias correction. One state instance covers a group of nets that
/// are always stepped together.
#[derive(Debug, Clone)]
pub struct AdamState<S: Scalar> {
    step_count: u64,
    learning_rate: S,
    beta1: S,
    beta2: S,
    epsilon: S,
    m: Vec<MlpGrads<S>>,
    v: Vec<MlpGrads<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(nets: &[&Mlp<S>], learning_rate: S) -> Self {
        AdamState {
            step_count: 0,
            learning_rate,
            beta1: S::from_f64(0.9),
            beta2: S::from_f64(0.999),
            epsilon: S::from_f64(1e-8),
            m: nets.iter().map(|n| n.zero_grads()).collect(),
            v: nets.iter().map(|n| n.zero_grads()).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn learning_rate(&self) -> S {
        self.learning_rate
    }

    /// One Adam update applied to `nets` with matching `grads`.
    pub fn apply(&mut self, nets: &mut [&mut Mlp<S>], grads: &[MlpGrads<S>]) -> Result<()> {
        if nets.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("adam apply", self.m.len(), nets.len().max(grads.len())));
        }
        for (net, g) in nets.iter().zip(grads.iter()) {
            if !net.shapes_match(g) {
                return Err(Error::InvalidArgument(
                    "adam apply: gradient shapes do not match parameters".into(),
                ));
            }
        }
        self.step_count += 1;
        let t = S::from_f64(self.step_count as f64);
        let bc1 = S::one() - self.beta1.powf(t);
        let bc2 = S::one() - self.beta2.powf(t);
        let (b1, b2) = (self.beta1, self.beta2);
        let (lr, eps) = (self.learning_rate, self.epsilon);

        let update = |p: &mut S, g: S, m: &mut S, v: &mut S| {
            *m = b1 * *m + (S::one() - b1) * g;
            *v = b2 * *v + (S::one() - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= lr * mh / (vh.sqrt() + eps);
        };

        for (i, net) in nets.iter_mut().enumerate() {
            for l in 0..net.weights.len() {
                let (w, gw) = (&mut net.weights[l], &grads[i].weights[l]);
                let (mw, vw) = (&mut self.m[i].weights[l], &mut self.v[i].weights[l]);
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        update(&mut w[(r, c)], gw[(r, c)], &mut mw[(r, c)], &mut vw[(r, c)]);
                    }
                }
                let (b, gb) = (&mut net.biases[l], &grads[i].biases[l]);
                let (mb, vb) = (&mut self.m[i].biases[l], &mut self.v[i].biases[l]);
                for j in 0..b.len() {
                    update(&mut b[j], gb[j], &mut mb[j], &mut vb[j]);
                }
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> (&[MlpGrads<S>], &[MlpGrads<S>]) {
        (&self.m, &self.v)
    }

    /// Restores a previously captured optimizer state.
    pub fn restore(&mut self, step_count: u64, m: Vec<MlpGrads<S>>, v: Vec<MlpGrads<S>>) {
        self.step_count = step_count;
        self.m = m;
        self.v = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rng() -> RngStream {
        RngStream::new(1234, 0)
    }

    /// Explicit nested-loop affine + rectifier chain, independent of ndarray.
    fn forward_oracle(net: &Mlp<f64>, input: &[f64]) -> Vec<f64> {
        let mut h = input.to_vec();
        for l in 0..net.num_layers() {
            let w = net.weight(l);
            let b = net.bias(l);
            let mut y = vec![0.0; w.nrows()];
            for r in 0..w.nrows() {
                let mut acc = 0.0;
                for c in 0..w.ncols() {
                    acc += w[(r, c)] * h[c];
                }
                y[r] = acc + b[r];
            }
            if l + 1 < net.num_layers() {
                for v in &mut y {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            h = y;
        }
        h
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[3, 4, 2]);
        let out = net.forward(&Array1::from(vec![0.7, -0.3, 2.0])).unwrap();
        assert_eq!(out.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut net = Mlp::<f64>::zeros(&[2, 2]);
        net.weight_mut(0)[(0, 0)] = 1.0;
        net.weight_mut(0)[(1, 1)] = 1.0;
        let out = net.forward(&Array1::from(vec![1.0, 2.0])).unwrap();
        assert_eq!(out.to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn forward_matches_nested_loop_oracle() {
        let net = Mlp::<f64>::new(&[3, 4, 2], &mut rng());
        let input = vec![0.2, -1.4, 0.9];
        let got = net.forward(&Array1::from(input.clone())).unwrap();
        let want = forward_oracle(&net, &input);
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_forward_agrees_with_single() {
        let net = Mlp::<f64>::new(&[3, 8, 5, 2], &mut rng());
        let rows = vec![vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0], vec![0.0, 0.0, 0.0]];
        let mut batch = Array2::zeros((3, 3));
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                batch[(i, j)] = *v;
            }
        }
        let out = net.forward_batch(&batch).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let single = net.forward(&Array1::from(r.clone())).unwrap();
            for j in 0..2 {
                assert_relative_eq!(out[(i, j)], single[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = Mlp::<f64>::new(&[3, 2], &mut rng());
        assert!(net.forward(&Array1::zeros(4)).is_err());
    }

    #[test]
    fn param_count_formula() {
        let net = Mlp::<f64>::new(&[3, 4, 2], &mut rng());
        assert_eq!(net.param_count(), (3 + 1) * 4 + (4 + 1) * 2);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Mlp::<f64>::new(&[4, 8, 3], &mut RngStream::new(9, 1));
        let b = Mlp::<f64>::new(&[4, 8, 3], &mut RngStream::new(9, 1));
        for l in 0..a.num_layers() {
            assert_eq!(a.weight(l), b.weight(l));
        }
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let net = Mlp::<f64>::new(&[3, 6, 2], &mut rng());
        let input = Array1::from(vec![0.4, -0.2, 1.1]);
        let plain = net.forward(&input).unwrap();
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape);
        let x = tape.constant(input);
        let y = net.forward_tape(&mut tape, &vars, x);
        assert_eq!(tape.value(y).to_vec(), plain.to_vec());
    }

    #[test]
    fn half_squared_norm_gradient_matches_finite_differences() {
        let net = Mlp::<f64>::new(&[3, 5, 2], &mut rng());
        let input = Array1::from(vec![0.3, -0.8, 0.5]);
        let loss_of = |net: &Mlp<f64>| {
            let y = net.forward(&input).unwrap();
            0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };

        let mut tape = Tape::new();
        let vars = net.bind(&mut tape);
        let x = tape.constant(input.clone());
        let y = net.forward_tape(&mut tape, &vars, x);
        let ss = tape.sum_squares(y);
        let loss = tape.scale(ss, 0.5);
        let grads = tape.backward(loss).unwrap();
        let g = net.grads_from(&grads, &vars);

        let h = 1e-5;
        for l in 0..net.num_layers() {
            for r in 0..net.weight(l).nrows() {
                for c in 0..net.weight(l).ncols() {
                    let mut plus = net.clone();
                    plus.weight_mut(l)[(r, c)] += h;
                    let mut minus = net.clone();
                    minus.weight_mut(l)[(r, c)] -= h;
                    let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                    assert_relative_eq!(
                        g.weights[l][(r, c)],
                        fd,
                        max_relative = 1e-4,
                        epsilon = 1e-6
                    );
                }
            }
        }
    }

    #[test]
    fn unused_parameter_block_gets_zero_gradient() {
        // Loss depends only on net_a; net_b's block must be exactly zero.
        let net_a = Mlp::<f64>::new(&[2, 3, 1], &mut RngStream::new(5, 0));
        let net_b = Mlp::<f64>::new(&[2, 3, 1], &mut RngStream::new(5, 1));
        let mut tape = Tape::new();
        let va = net_a.bind(&mut tape);
        let vb = net_b.bind(&mut tape);
        let x = tape.constant_slice(&[0.5, -0.5]);
        let ya = net_a.forward_tape(&mut tape, &va, x);
        let loss = tape.sum_squares(ya);
        let grads = tape.backward(loss).unwrap();
        let gb = net_b.grads_from(&grads, &vb);
        assert!(gb.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(gb.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut net = Mlp::<f64>::new(&[2, 3], &mut rng());
        let before = net.clone();
        let g = net.zero_grads();
        let mut adam = AdamState::new(&[&net], 3e-4);
        adam.apply(&mut [&mut net], &[g]).unwrap();
        for l in 0..net.num_layers() {
            assert_eq!(net.weight(l), before.weight(l));
            assert_eq!(net.bias(l), before.bias(l));
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // Single scalar parameter, gradient 1: first step moves by
        // lr * 1 / (1 + eps).
        let mut net = Mlp::<f64>::zeros(&[1, 1]);
        net.weight_mut(0)[(0, 0)] = 0.7;
        let mut g = net.zero_grads();
        g.weights[0][(0, 0)] = 1.0;
        let mut adam = AdamState::new(&[&net], 3e-4);
        adam.apply(&mut [&mut net], &[g]).unwrap();
        let expected = 0.7 - 3e-4 / (1.0 + 1e-8);
        assert_relative_eq!(net.weight(0)[(0, 0)], expected, epsilon = 1e-15);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut net = Mlp::<f64>::new(&[2, 3], &mut rng());
        let other = Mlp::<f64>::new(&[2, 4], &mut rng());
        let g = other.zero_grads();
        let mut adam = AdamState::new(&[&net], 3e-4);
        assert!(adam.apply(&mut [&mut net], &[g]).is_err());
    }
}
