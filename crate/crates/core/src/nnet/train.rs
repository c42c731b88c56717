//! Mini-batch SGD trainers for ERM, DANN and invDANN.
//!
//! All randomness (initialization and batch order) derives from
//! `TrainConfig::seed`; training is single-threaded so a fixed
//! `(data, config)` reproduces parameters bit for bit. ERM and the primary
//! head of the adversarial trainers share initialization streams, so with
//! `λ = 0` the adversarial featurizer follows exactly the trajectory of the
//! plain classifier on the primary target.

use serde::{Deserialize, Serialize};

use super::adversarial::{adversarial_gradients, AdversarialModel};
use super::{argmax, softmax_cross_entropy, Activation, Mlp, MlpGrads};
use crate::data::DomainDataset;
use crate::error::{DomiError, Result};
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub reversal_strength: f64,
    /// Featurizer hidden widths; the last one is the representation size.
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.05,
            reversal_strength: 1.0,
            hidden_dims: vec![32, 32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DomiError::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(DomiError::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.reversal_strength >= 0.0) || !self.reversal_strength.is_finite() {
            return Err(DomiError::Config(format!(
                "reversal_strength must be finite and >= 0, got {}",
                self.reversal_strength
            )));
        }
        if self.hidden_dims.contains(&0) {
            return Err(DomiError::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    fn featurizer_dims(&self, input: usize) -> Vec<usize> {
        std::iter::once(input)
            .chain(self.hidden_dims.iter().copied())
            .collect()
    }
}

/// What a head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Class,
    Domain,
}

impl Target {
    pub fn labels(self, data: &DomainDataset) -> Vec<usize> {
        match self {
            Target::Class => data.points().iter().map(|p| p.y).collect(),
            Target::Domain => {
                let ids = data.domain_ids();
                data.points()
                    .iter()
                    .map(|p| ids.binary_search(&p.domain).unwrap())
                    .collect()
            }
        }
    }

    pub fn n_outputs(self, data: &DomainDataset) -> usize {
        match self {
            Target::Class => data.n_classes(),
            Target::Domain => data.n_domains(),
        }
    }

    fn require(self, data: &DomainDataset) -> Result<()> {
        let distinct = match self {
            Target::Class => data.distinct_classes(),
            Target::Domain => data.n_domains(),
        };
        if distinct < 2 {
            let what = match self {
                Target::Class => "classes",
                Target::Domain => "domains",
            };
            return Err(DomiError::Degenerate(format!(
                "training needs at least 2 {what}, found {distinct}"
            )));
        }
        Ok(())
    }
}

/// Featurizer plus a linear classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmModel {
    pub featurizer: Mlp,
    pub classifier: Mlp,
}

impl ErmModel {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let f = self.featurizer.forward(x)?;
        Ok(argmax(&self.classifier.forward_unchecked(&f)))
    }

    pub fn accuracy(&self, data: &DomainDataset, target: Target) -> f64 {
        accuracy(
            &self.featurizer,
            &self.classifier,
            data,
            &target.labels(data),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErmTraining {
    pub model: ErmModel,
    pub train_accuracy: f64,
    /// Mean mini-batch loss per epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialTraining {
    pub model: AdversarialModel,
    pub primary_accuracy: f64,
    pub adversary_accuracy: f64,
    /// Mean `(CE_primary, CE_adversary)` per epoch.
    pub loss_history: Vec<(f64, f64)>,
}

fn accuracy(featurizer: &Mlp, head: &Mlp, data: &DomainDataset, labels: &[usize]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .points()
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(&head.forward_unchecked(&featurizer.forward_unchecked(&p.x))) == y)
        .count();
    hits as f64 / data.len() as f64
}

/// Runs `step` on every shuffled mini-batch of every epoch; returns the
/// mean step value per epoch.
fn run_epochs<T>(
    n: usize,
    cfg: &TrainConfig,
    zero: T,
    mut step: impl FnMut(&[usize]) -> T,
    add: impl Fn(T, T) -> T,
    scale: impl Fn(T, f64) -> T,
) -> Vec<T>
where
    T: Copy,
{
    let mut rng = SeededRng::for_stage(cfg.seed, "batches");
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = zero;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            total = add(total, step(chunk));
            batches += 1;
        }
        history.push(scale(total, 1.0 / batches.max(1) as f64));
    }
    history
}

fn init_featurizer(data: &DomainDataset, cfg: &TrainConfig) -> Result<Mlp> {
    Mlp::glorot(
        &cfg.featurizer_dims(data.dim()),
        Activation::Tanh,
        derive_seed(cfg.seed, "init/featurizer"),
    )
}

fn init_head(inputs: usize, outputs: usize, cfg: &TrainConfig, label: &str) -> Result<Mlp> {
    Mlp::glorot(
        &[inputs, outputs],
        Activation::Identity,
        derive_seed(cfg.seed, label),
    )
}

/// Mean cross-entropy of `head ∘ featurizer` over a mini-batch and its
/// gradients `(loss, featurizer grads, head grads)`.
pub fn classifier_gradients(
    featurizer: &Mlp,
    head: &Mlp,
    xs: &[&[f64]],
    labels: &[usize],
) -> (f64, MlpGrads, MlpGrads) {
    let mut gf = MlpGrads::zeros_like(featurizer);
    let mut gh = MlpGrads::zeros_like(head);
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let f_trace = featurizer.trace(x);
        let h_trace = head.trace(f_trace.last().unwrap());
        let (l, g) = softmax_cross_entropy(h_trace.last().unwrap(), y);
        loss += l;
        let d = head.backward(&h_trace, &g, &mut gh);
        featurizer.backward(&f_trace, &d, &mut gf);
    }
    let inv = 1.0 / xs.len().max(1) as f64;
    gf.scale(inv);
    gh.scale(inv);
    (loss * inv, gf, gh)
}

/// Featurizer + linear head trained by SGD on mean cross-entropy.
pub fn train_classifier(
    data: &DomainDataset,
    target: Target,
    cfg: &TrainConfig,
) -> Result<ErmTraining> {
    cfg.validate()?;
    target.require(data)?;
    let labels = target.labels(data);
    let mut featurizer = init_featurizer(data, cfg)?;
    let mut classifier = init_head(
        featurizer.output_dim(),
        target.n_outputs(data),
        cfg,
        "init/head_primary",
    )?;
    let points = data.points();
    let loss_history = run_epochs(
        data.len(),
        cfg,
        0.0,
        |batch| {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| points[i].x.as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, gf, gh) = classifier_gradients(&featurizer, &classifier, &xs, &ys);
            featurizer.apply_sgd(&gf, cfg.learning_rate);
            classifier.apply_sgd(&gh, cfg.learning_rate);
            loss
        },
        |a, b| a + b,
        |a, s| a * s,
    );
    let model = ErmModel {
        featurizer,
        classifier,
    };
    let train_accuracy = accuracy(&model.featurizer, &model.classifier, data, &labels);
    Ok(ErmTraining {
        model,
        train_accuracy,
        loss_history,
    })
}

/// Empirical risk minimization on class labels.
pub fn train_erm(data: &DomainDataset, cfg: &TrainConfig) -> Result<ErmTraining> {
    train_classifier(data, Target::Class, cfg)
}

fn train_adversarial(
    data: &DomainDataset,
    primary: Target,
    adversary: Target,
    cfg: &TrainConfig,
) -> Result<AdversarialTraining> {
    cfg.validate()?;
    primary.require(data)?;
    adversary.require(data)?;
    let primary_labels = primary.labels(data);
    let adversary_labels = adversary.labels(data);
    let featurizer = init_featurizer(data, cfg)?;
    let f = featurizer.output_dim();
    let mut model = AdversarialModel::new(
        featurizer,
        init_head(f, primary.n_outputs(data), cfg, "init/head_primary")?,
        init_head(f, adversary.n_outputs(data), cfg, "init/head_adversary")?,
        cfg.reversal_strength,
    )?;
    let points = data.points();
    let loss_history = run_epochs(
        data.len(),
        cfg,
        (0.0, 0.0),
        |batch| {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| points[i].x.as_slice()).collect();
            let yp: Vec<usize> = batch.iter().map(|&i| primary_labels[i]).collect();
            let ya: Vec<usize> = batch.iter().map(|&i| adversary_labels[i]).collect();
            let (lp, la, g) = adversarial_gradients(&model, &xs, &yp, &ya);
            model.featurizer.apply_sgd(&g.featurizer, cfg.learning_rate);
            model
                .head_primary
                .apply_sgd(&g.head_primary, cfg.learning_rate);
            model
                .head_adversary
                .apply_sgd(&g.head_adversary, cfg.learning_rate);
            (lp, la)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
        |a, s| (a.0 * s, a.1 * s),
    );
    let primary_accuracy = accuracy(
        &model.featurizer,
        &model.head_primary,
        data,
        &primary_labels,
    );
    let adversary_accuracy = accuracy(
        &model.featurizer,
        &model.head_adversary,
        data,
        &adversary_labels,
    );
    Ok(AdversarialTraining {
        model,
        primary_accuracy,
        adversary_accuracy,
        loss_history,
    })
}

/// DANN: classify classes, adversarially fail to identify domains.
pub fn train_dann(data: &DomainDataset, cfg: &TrainConfig) -> Result<AdversarialTraining> {
    train_adversarial(data, Target::Class, Target::Domain, cfg)
}

/// invDANN: classify domains, adversarially fail to identify classes.
/// The resulting featurizer carries domain-side information only.
pub fn train_invdann(data: &DomainDataset, cfg: &TrainConfig) -> Result<AdversarialTraining> {
    train_adversarial(data, Target::Domain, Target::Class, cfg)
}

/// Train a fresh linear head on frozen features.
pub fn fit_probe(
    featurizer: &Mlp,
    data: &DomainDataset,
    target: Target,
    cfg: &TrainConfig,
) -> Result<Mlp> {
    cfg.validate()?;
    target.require(data)?;
    let labels = target.labels(data);
    let features: Vec<Vec<f64>> = data
        .points()
        .iter()
        .map(|p| featurizer.forward(&p.x))
        .collect::<Result<_>>()?;
    let mut head = init_head(
        featurizer.output_dim(),
        target.n_outputs(data),
        cfg,
        "init/probe",
    )?;
    run_epochs(
        data.len(),
        cfg,
        (),
        |batch| {
            let mut g = MlpGrads::zeros_like(&head);
            for &i in batch {
                let trace = head.trace(&features[i]);
                let (_, d) = softmax_cross_entropy(trace.last().unwrap(), labels[i]);
                head.backward(&trace, &d, &mut g);
            }
            g.scale(1.0 / batch.len() as f64);
            head.apply_sgd(&g, cfg.learning_rate);
        },
        |_, _| (),
        |_, _| (),
    );
    Ok(head)
}

pub fn probe_accuracy(featurizer: &Mlp, head: &Mlp, data: &DomainDataset, target: Target) -> f64 {
    accuracy(featurizer, head, data, &target.labels(data))
}
