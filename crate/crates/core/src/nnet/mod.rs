//! Minimal feed-forward networks with manual backpropagation.
//!
//! An [`Mlp`] is a stack of dense layers that all share one elementwise
//! activation. Featurizers use `tanh`; prediction heads are single
//! `Identity` layers feeding a softmax cross-entropy. The adversarial
//! models in [`adversarial`] attach a second head through a gradient
//! reversal layer.

pub mod adversarial;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{DomiError, Result};
use crate::rng::SeededRng;

pub use adversarial::{
    adversarial_gradients, forward, gradient_reversal_backward, gradient_reversal_forward,
    AdversarialGrads, AdversarialModel, ForwardOutput,
};
pub use train::{
    classifier_gradients, fit_probe, probe_accuracy, train_classifier, train_dann, train_erm,
    train_invdann, AdversarialTraining, ErmModel, ErmTraining, Target, TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense network. `weights[l]` is row-major `layer_dims[l+1] × layer_dims[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr")]
pub struct Mlp {
    layer_dims: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct MlpRepr {
    layer_dims: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = DomiError;

    fn try_from(r: MlpRepr) -> Result<Self> {
        Mlp::from_parts(r.layer_dims, r.activation, r.weights, r.biases)
    }
}

impl Mlp {
    pub fn from_parts(
        layer_dims: Vec<usize>,
        activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.contains(&0) {
            return Err(DomiError::InvalidArgument(
                "layer dims must be nonempty and positive".into(),
            ));
        }
        let n_layers = layer_dims.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(DomiError::DimensionMismatch {
                expected: n_layers,
                got: weights.len().min(biases.len()),
            });
        }
        for l in 0..n_layers {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            if weights[l].len() != fan_in * fan_out {
                return Err(DomiError::DimensionMismatch {
                    expected: fan_in * fan_out,
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != fan_out {
                return Err(DomiError::DimensionMismatch {
                    expected: fan_out,
                    got: biases[l].len(),
                });
            }
        }
        let mlp = Self {
            layer_dims,
            activation,
            weights,
            biases,
        };
        if mlp.params().any(|p| !p.is_finite()) {
            return Err(DomiError::Degenerate("non-finite parameter".into()));
        }
        Ok(mlp)
    }

    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        let n_layers = layer_dims.len().saturating_sub(1);
        let weights = (0..n_layers)
            .map(|l| vec![0.0; layer_dims[l] * layer_dims[l + 1]])
            .collect();
        let biases = (0..n_layers)
            .map(|l| vec![0.0; layer_dims[l + 1]])
            .collect();
        Self::from_parts(layer_dims.to_vec(), activation, weights, biases)
    }

    /// Glorot-uniform weights `U(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`; zero biases.
    pub fn glorot(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, activation)?;
        let mut rng = SeededRng::new(seed);
        for l in 0..mlp.n_layers() {
            let s = (6.0 / (layer_dims[l] + layer_dims[l + 1]) as f64).sqrt();
            for w in &mut mlp.weights[l] {
                *w = rng.uniform_range(-s, s);
            }
        }
        Ok(mlp)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn param_count(&self) -> usize {
        self.params().count()
    }

    /// Checked forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(DomiError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DomiError::Degenerate("non-finite input".into()));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            a = self.layer(l, &a);
        }
        a
    }

    fn layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let fan_in = self.layer_dims[l];
        self.weights[l]
            .chunks_exact(fan_in)
            .zip(&self.biases[l])
            .map(|(row, b)| {
                let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
                self.activation.apply(z)
            })
            .collect()
    }

    /// Activations of every layer, input first.
    pub(crate) fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let next = self.layer(l, &acts[l]);
            acts.push(next);
        }
        acts
    }

    /// Accumulate parameter gradients for one example into `grads` and
    /// return the gradient with respect to the input.
    pub(crate) fn backward(
        &self,
        trace: &[Vec<f64>],
        grad_out: &[f64],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        let mut upstream = grad_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let fan_in = self.layer_dims[l];
            let input = &trace[l];
            let output = &trace[l + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(output)
                .map(|(g, a)| g * self.activation.derivative_from_output(*a))
                .collect();
            let mut down = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                let grow = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    grow[i] += d * input[i];
                    down[i] += d * row[i];
                }
            }
            upstream = down;
        }
        upstream
    }

    /// `θ ← θ − lr·g`.
    pub fn apply_sgd(&mut self, grads: &MlpGrads, lr: f64) {
        for (p, g) in self.params_mut().zip(grads.iter()) {
            *p -= lr * g;
        }
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Same ordering as [`Mlp::params`].
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn scale(&mut self, f: f64) {
        for v in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
        {
            *v *= f;
        }
    }
}

/// Loss and logit gradient of softmax cross-entropy for one example.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}
