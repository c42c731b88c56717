//! Featurizer with a primary head and an adversary head behind a gradient
//! reversal layer.
//!
//! Forward: `features = Φ(x)`, `primary = H_p(features)`,
//! `adversary = H_a(R(features))` where `R` is the identity. Backward: `R`
//! multiplies the incoming gradient by `-λ`, so each head descends its own
//! cross-entropy while the featurizer descends `CE_p − λ·CE_a`.

use serde::{Deserialize, Serialize};

use super::{softmax_cross_entropy, Mlp, MlpGrads};
use crate::error::{DomiError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialModel {
    pub featurizer: Mlp,
    pub head_primary: Mlp,
    pub head_adversary: Mlp,
    pub reversal_strength: f64,
}

impl AdversarialModel {
    pub fn new(
        featurizer: Mlp,
        head_primary: Mlp,
        head_adversary: Mlp,
        reversal_strength: f64,
    ) -> Result<Self> {
        let f = featurizer.output_dim();
        for head in [&head_primary, &head_adversary] {
            if head.input_dim() != f {
                return Err(DomiError::DimensionMismatch {
                    expected: f,
                    got: head.input_dim(),
                });
            }
        }
        if !(reversal_strength >= 0.0) || !reversal_strength.is_finite() {
            return Err(DomiError::InvalidArgument(format!(
                "reversal strength must be finite and >= 0, got {reversal_strength}"
            )));
        }
        Ok(Self {
            featurizer,
            head_primary,
            head_adversary,
            reversal_strength,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub features: Vec<f64>,
    pub primary_logits: Vec<f64>,
    pub adversary_logits: Vec<f64>,
}

pub fn forward(model: &AdversarialModel, x: &[f64]) -> Result<ForwardOutput> {
    let features = model.featurizer.forward(x)?;
    let primary_logits = model.head_primary.forward_unchecked(&features);
    let reversed = gradient_reversal_forward(&features);
    let adversary_logits = model.head_adversary.forward_unchecked(&reversed);
    Ok(ForwardOutput {
        features,
        primary_logits,
        adversary_logits,
    })
}

/// Identity.
pub fn gradient_reversal_forward(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// `-λ · upstream`.
pub fn gradient_reversal_backward(upstream: &[f64], strength: f64) -> Vec<f64> {
    upstream.iter().map(|g| -strength * g).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialGrads {
    pub featurizer: MlpGrads,
    pub head_primary: MlpGrads,
    pub head_adversary: MlpGrads,
}

/// Mean losses and gradients over a mini-batch.
///
/// Returns `(CE_primary, CE_adversary, grads)`. Head gradients are those of
/// their own cross-entropy; the featurizer gradient is that of
/// `CE_primary − λ·CE_adversary`.
pub fn adversarial_gradients(
    model: &AdversarialModel,
    xs: &[&[f64]],
    primary_labels: &[usize],
    adversary_labels: &[usize],
) -> (f64, f64, AdversarialGrads) {
    let mut grads = AdversarialGrads {
        featurizer: MlpGrads::zeros_like(&model.featurizer),
        head_primary: MlpGrads::zeros_like(&model.head_primary),
        head_adversary: MlpGrads::zeros_like(&model.head_adversary),
    };
    let (mut loss_p, mut loss_a) = (0.0, 0.0);
    for ((x, &yp), &ya) in xs.iter().zip(primary_labels).zip(adversary_labels) {
        let f_trace = model.featurizer.trace(x);
        let features = f_trace.last().unwrap();
        let p_trace = model.head_primary.trace(features);
        let a_trace = model
            .head_adversary
            .trace(&gradient_reversal_forward(features));
        let (lp, gp) = softmax_cross_entropy(p_trace.last().unwrap(), yp);
        let (la, ga) = softmax_cross_entropy(a_trace.last().unwrap(), ya);
        loss_p += lp;
        loss_a += la;
        let d_from_primary = model
            .head_primary
            .backward(&p_trace, &gp, &mut grads.head_primary);
        let d_from_adversary =
            model
                .head_adversary
                .backward(&a_trace, &ga, &mut grads.head_adversary);
        let reversed = gradient_reversal_backward(&d_from_adversary, model.reversal_strength);
        let d_features: Vec<f64> = d_from_primary
            .iter()
            .zip(&reversed)
            .map(|(a, b)| a + b)
            .collect();
        model
            .featurizer
            .backward(&f_trace, &d_features, &mut grads.featurizer);
    }
    let inv = 1.0 / xs.len().max(1) as f64;
    grads.featurizer.scale(inv);
    grads.head_primary.scale(inv);
    grads.head_adversary.scale(inv);
    (loss_p * inv, loss_a * inv, grads)
}
