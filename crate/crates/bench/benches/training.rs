use criterion::{black_box, criterion_group, criterion_main, Criterion};

use domi_core::nnet::{
    adversarial_gradients, classifier_gradients, Activation, AdversarialModel, Mlp,
};
use domi_core::{describe_domains, generate, SeededRng, SynthConfig};

fn batch(n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>, Vec<usize>) {
    let mut rng = SeededRng::new(5);
    let xs = (0..n)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect();
    (
        xs,
        (0..n).map(|i| i % 2).collect(),
        (0..n).map(|i| i % 40).collect(),
    )
}

fn training_step(c: &mut Criterion) {
    let (xs, classes, domains) = batch(32, 36);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let featurizer = Mlp::glorot(&[36, 32, 32], Activation::Tanh, 1).unwrap();
    let head = Mlp::glorot(&[32, 2], Activation::Identity, 2).unwrap();
    c.bench_function("erm_step_batch32", |b| {
        b.iter(|| classifier_gradients(black_box(&featurizer), &head, &refs, &classes))
    });
    let model = AdversarialModel::new(
        featurizer.clone(),
        Mlp::glorot(&[32, 40], Activation::Identity, 3).unwrap(),
        head.clone(),
        1.0,
    )
    .unwrap();
    c.bench_function("invdann_step_batch32", |b| {
        b.iter(|| adversarial_gradients(black_box(&model), &refs, &domains, &classes))
    });
}

fn descriptions(c: &mut Criterion) {
    let data = generate(&SynthConfig {
        points_per_domain: 100,
        ..Default::default()
    })
    .unwrap()
    .train;
    let featurizer = Mlp::glorot(&[data.dim(), 32, 32], Activation::Tanh, 4).unwrap();
    c.bench_function("describe_61_domains", |b| {
        b.iter(|| describe_domains(black_box(&featurizer), &data, None, 0).unwrap())
    });
}

criterion_group!(benches, training_step, descriptions);
criterion_main!(benches);
