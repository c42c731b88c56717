use domi_core::data::{DomainDataset, LabeledPoint};
use domi_core::nnet::*;
use domi_core::{generate, SeededRng, SynthConfig};

fn blobs(n: usize, n_domains: u32, shift: f64, seed: u64) -> DomainDataset {
    let mut rng = SeededRng::new(seed);
    let pts = (0..n)
        .map(|i| {
            let y = i % 2;
            let domain = (i / 2) as u32 % n_domains;
            let c = if y == 1 { 1.0 } else { -1.0 };
            LabeledPoint {
                x: vec![
                    c + 0.3 * rng.normal(),
                    c + 0.3 * rng.normal(),
                    shift * domain as f64 + 0.3 * rng.normal(),
                ],
                y,
                domain,
            }
        })
        .collect();
    DomainDataset::new(pts).unwrap()
}

fn reference_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let dims = mlp.layer_dims();
    let mut a = x.to_vec();
    for l in 0..mlp.n_layers() {
        let w = mlp.weights(l);
        let b = mlp.biases(l);
        let mut next = Vec::with_capacity(dims[l + 1]);
        for o in 0..dims[l + 1] {
            let mut z = b[o];
            for i in 0..dims[l] {
                z += w[o * dims[l] + i] * a[i];
            }
            next.push(match mlp.activation() {
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            });
        }
        a = next;
    }
    a
}

#[test]
fn forward_matches_reference() {
    let mut rng = SeededRng::new(11);
    for seed in 0..20 {
        let model = AdversarialModel::new(
            Mlp::glorot(&[5, 7, 6], Activation::Tanh, seed).unwrap(),
            Mlp::glorot(&[6, 3], Activation::Identity, seed + 100).unwrap(),
            Mlp::glorot(&[6, 4], Activation::Identity, seed + 200).unwrap(),
            0.7,
        )
        .unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let out = forward(&model, &x).unwrap();
        let feats = reference_forward(&model.featurizer, &x);
        let pairs = [
            (&out.features, feats.clone()),
            (
                &out.primary_logits,
                reference_forward(&model.head_primary, &feats),
            ),
            (
                &out.adversary_logits,
                reference_forward(&model.head_adversary, &feats),
            ),
        ];
        for (got, want) in pairs {
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn separable_blobs_are_learned() {
    let data = blobs(400, 4, 0.0, 1);
    let cfg = TrainConfig {
        epochs: 50,
        ..Default::default()
    };
    let trained = train_erm(&data, &cfg).unwrap();
    assert!(trained.train_accuracy >= 0.95, "{}", trained.train_accuracy);
}

#[test]
fn full_batch_linear_loss_never_increases() {
    let data = blobs(200, 2, 0.0, 2);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: data.len(),
        learning_rate: 0.1,
        hidden_dims: vec![],
        ..Default::default()
    };
    let trained = train_erm(&data, &cfg).unwrap();
    let h = &trained.loss_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0]), "{h:?}");
    assert!(h.last().unwrap() < &h[0]);
}

#[test]
fn dann_hides_an_additive_domain_shift() {
    let data = blobs(800, 4, 2.0, 3);
    let cfg = TrainConfig {
        epochs: 50,
        ..Default::default()
    };
    let trained = train_dann(&data, &cfg).unwrap();
    assert!(
        (trained.adversary_accuracy - 0.25).abs() <= 0.15,
        "{}",
        trained.adversary_accuracy
    );
    assert!(trained.primary_accuracy >= 0.95);
}

#[test]
fn zero_reversal_detaches_the_adversary() {
    let data = blobs(120, 3, 1.0, 4);
    let cfg = TrainConfig {
        epochs: 5,
        reversal_strength: 0.0,
        ..Default::default()
    };
    let dann = train_dann(&data, &cfg).unwrap();
    let erm = train_erm(&data, &cfg).unwrap();
    assert_eq!(dann.model.featurizer, erm.model.featurizer);
    assert_eq!(dann.model.head_primary, erm.model.classifier);
    let inv = train_invdann(&data, &cfg).unwrap();
    let plain = train_classifier(&data, Target::Domain, &cfg).unwrap();
    assert_eq!(inv.model.featurizer, plain.model.featurizer);
    assert_eq!(inv.model.head_primary, plain.model.classifier);
}

#[test]
fn invdann_separates_angle_buckets_and_forgets_class() {
    let synth = SynthConfig {
        points_per_domain: 100,
        ..Default::default()
    };
    let train = generate(&synth).unwrap().train;
    let held_out = generate(&SynthConfig { seed: 99, ..synth }).unwrap().train;
    let cfg = TrainConfig::default();
    let trained = train_invdann(&train, &cfg).unwrap();
    let f = &trained.model.featurizer;
    let domain_acc = probe_accuracy(f, &trained.model.head_primary, &held_out, Target::Domain);
    let probe = fit_probe(f, &train, Target::Class, &cfg).unwrap();
    let class_acc = probe_accuracy(f, &probe, &held_out, Target::Class);
    assert!(domain_acc >= 0.8, "{domain_acc}");
    assert!((class_acc - 0.5).abs() <= 0.15, "{class_acc}");
}

#[test]
fn fixed_seed_gives_identical_parameters() {
    let data = blobs(100, 2, 1.0, 5);
    let cfg = TrainConfig {
        epochs: 3,
        ..Default::default()
    };
    assert_eq!(
        train_invdann(&data, &cfg).unwrap().model,
        train_invdann(&data, &cfg).unwrap().model
    );
}
