use std::collections::BTreeSet;
use std::sync::OnceLock;

use domi_core::data::{DomainDataset, LabeledPoint};
use domi_core::domi::{level_one_sample, level_two_sample, mean_pairwise_similarity};
use domi_core::nnet::{train_erm, Target, TrainConfig};
use domi_core::stats::{median, permutation_test_greater, spearman};
use domi_core::*;

const SEEDS: u64 = 30;

fn small_synth(n_domains: usize, points: usize) -> SynthData {
    generate(&SynthConfig {
        n_domains,
        points_per_domain: points,
        test_points_per_domain: 50,
        ..Default::default()
    })
    .unwrap()
}

fn small_cfg(n_domains: usize, k: usize, batch_size: usize, delta: usize) -> DomiConfig {
    let mut cfg = DomiConfig::default();
    cfg.level1.train_domain_count = n_domains;
    cfg.level1.per_domain_cap = 40;
    cfg.level1.k_domains = k;
    cfg.level1.invdann.epochs = 5;
    cfg.level2.batch_size = batch_size;
    cfg.level2.delta = delta;
    cfg.level2.erm.epochs = 5;
    cfg.level2.erm.hidden_dims = vec![32, 32];
    cfg
}

fn level_one_cfg(seed: u64) -> DomiConfig {
    let mut cfg = DomiConfig::default();
    cfg.level1.per_domain_cap = 100;
    cfg.seed = seed;
    cfg
}

#[test]
fn all_domains_and_all_batches_cover_the_dataset() {
    let data = small_synth(6, 30).train;
    let cfg = small_cfg(6, 6, 20, 9);
    let result = domi_sample(&data, &cfg).unwrap();
    assert_eq!(result.omega.sorted(), (0..6).collect::<Vec<_>>());
    assert_eq!(result.n_batches, 9);
    let covered: BTreeSet<usize> = result.batch_members.iter().flatten().copied().collect();
    assert_eq!(covered, (0..data.len()).collect());
    assert_eq!(
        result.batch_members.iter().map(Vec::len).sum::<usize>(),
        data.len()
    );
}

#[test]
fn containment_shapes_and_determinism() {
    let data = small_synth(12, 40).train;
    let cfg = DomiConfig {
        seed: 3,
        ..small_cfg(8, 4, 16, 6)
    };
    let a = domi_sample(&data, &cfg).unwrap();
    assert_eq!(a.omega_domains.len(), 4);
    assert_eq!(a.batch_members.len(), 6);
    assert_eq!(a.n_batches, 10);
    let omega: BTreeSet<u32> = a.omega_domains.iter().copied().collect();
    for batch in &a.batch_members {
        assert!(batch
            .iter()
            .all(|&i| omega.contains(&data.points()[i].domain)));
    }
    let b = domi_sample(&data, &cfg).unwrap();
    assert_eq!(a.omega_domains, b.omega_domains);
    assert_eq!(a.batches.indices, b.batches.indices);
    assert_eq!(a.batch_members, b.batch_members);
    assert_eq!(a.featurizer1, b.featurizer1);
    assert_eq!(a.featurizer2, b.featurizer2);
    assert_eq!(a.kernel_domains.entries(), b.kernel_domains.entries());
    assert_eq!(a.kernel_batches.entries(), b.kernel_batches.entries());
}

#[test]
fn delta_equal_to_batch_count_keeps_every_batch() {
    let data = small_synth(4, 30).train;
    let cfg = small_cfg(4, 2, 7, 9);
    let two = level_two_sample(&data.restrict_to_domains(&[0, 1]).unwrap(), &cfg).unwrap();
    assert_eq!(two.batches.len(), 9);
    assert_eq!(two.selection.sorted(), (0..9).collect::<Vec<_>>());
}

#[test]
fn cloned_domain_never_joins_its_original() {
    let base = small_synth(8, 30).train;
    let mut points: Vec<LabeledPoint> = base.points().to_vec();
    points.extend(
        base.points()
            .iter()
            .filter(|p| p.domain == 0)
            .map(|p| LabeledPoint {
                domain: 8,
                ..p.clone()
            }),
    );
    let data = DomainDataset::new(points).unwrap();
    for seed in 0..20 {
        let cfg = DomiConfig {
            seed,
            ..small_cfg(9, 3, 16, 1)
        };
        let one = level_one_sample(&data, &cfg).unwrap();
        let omega = &one.omega_domains;
        assert!(
            !(omega.contains(&0) && omega.contains(&8)),
            "seed {seed}: {omega:?}"
        );
    }
}

#[test]
fn identical_batch_descriptions_are_never_co_selected() {
    let rows = vec![
        vec![1.0, 0.3, 0.3],
        vec![0.3, 1.0, 1.0],
        vec![0.3, 1.0, 1.0],
    ];
    let l = Kernel::from_rows(&rows).unwrap();
    for method in [SamplerMethod::Kdpp, SamplerMethod::Map] {
        for seed in 0..2000 {
            let sel = method.draw(&l, 2, seed).unwrap();
            assert!(sel.contains(0), "{method:?} seed {seed}");
        }
    }
}

struct LevelOneRun {
    dpp: f64,
    random: f64,
    below_median: bool,
}

fn level_one_runs() -> &'static [LevelOneRun] {
    static RUNS: OnceLock<Vec<LevelOneRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let data = generate(&SynthConfig {
            points_per_domain: 100,
            ..Default::default()
        })
        .unwrap()
        .train;
        (0..SEEDS)
            .map(|seed| {
                let one = level_one_sample(&data, &level_one_cfg(seed)).unwrap();
                let n = one.kernel.len();
                let baseline: Vec<f64> = (0..1000)
                    .map(|r| {
                        let s = sample_random(n, 5, derive_seed(seed, &format!("baseline/{r}")));
                        mean_pairwise_similarity(&one.kernel, &s.unwrap().indices)
                    })
                    .collect();
                let dpp = mean_pairwise_similarity(&one.kernel, &one.omega.indices);
                let random = sample_random(n, 5, derive_seed(seed, "random")).unwrap();
                LevelOneRun {
                    dpp,
                    random: mean_pairwise_similarity(&one.kernel, &random.indices),
                    below_median: dpp < median(&baseline),
                }
            })
            .collect()
    })
}

#[test]
fn level_one_beats_the_random_median_for_seed_zero() {
    assert!(level_one_runs()[0].below_median);
}

#[test]
fn level_one_is_more_diverse_than_random_domains() {
    let runs = level_one_runs();
    let dpp: Vec<f64> = runs.iter().map(|r| r.dpp).collect();
    let random: Vec<f64> = runs.iter().map(|r| r.random).collect();
    let p = permutation_test_greater(&random, &dpp, 1).unwrap();
    assert!(p < 0.01, "p = {p}");
}

#[test]
fn level_two_lowers_spurious_correlation() {
    let synth_cfg = SynthConfig {
        points_per_domain: 100,
        ..Default::default()
    };
    let data = generate(&synth_cfg).unwrap().train;
    let restricted = data.restrict_to_domains(&[0, 15, 30, 45, 60]).unwrap();
    let mut cfg = DomiConfig::default();
    cfg.level2.batch_size = 10;
    cfg.level2.delta = 25;
    let two = level_two_sample(&restricted, &cfg).unwrap();
    let col = synth_cfg.blocks()[1].start;
    let corr = |batches: &[usize]| {
        let idx: Vec<usize> = batches
            .iter()
            .flat_map(|&b| two.batches[b].iter().copied())
            .collect();
        let xs: Vec<f64> = idx.iter().map(|&i| restricted.points()[i].x[col]).collect();
        let ys: Vec<f64> = idx
            .iter()
            .map(|&i| restricted.points()[i].y as f64)
            .collect();
        stats::pearson(&xs, &ys).unwrap()
    };
    let baseline: Vec<f64> = (0..1000)
        .map(|r| {
            let s = sample_random(two.batches.len(), 25, derive_seed(11, &r.to_string())).unwrap();
            corr(&s.indices)
        })
        .collect();
    let got = corr(&two.selection.indices);
    assert!(
        got < median(&baseline),
        "{got} vs median {}",
        median(&baseline)
    );
}

#[test]
fn generator_marginals() {
    let cfg = SynthConfig {
        spurious_alignment: 0.5,
        ..Default::default()
    };
    let data = generate(&cfg).unwrap();
    let col = cfg.blocks()[1].start;
    for set in [&data.train, &data.test] {
        let xs: Vec<f64> = set.points().iter().map(|p| p.x[col]).collect();
        let ys: Vec<f64> = set.points().iter().map(|p| p.y as f64).collect();
        let r = stats::pearson(&xs, &ys).unwrap();
        assert!(r.abs() <= 3.0 / (set.len() as f64).sqrt(), "{r}");
    }
}

#[test]
fn closer_angles_have_more_similar_domain_blocks() {
    let cfg = SynthConfig {
        points_per_domain: 100,
        noise_std: 0.1,
        ..Default::default()
    };
    let data = generate(&cfg).unwrap();
    let block = cfg.blocks()[2].clone();
    let mut means = Vec::new();
    let mut angles = Vec::new();
    for (set, set_angles) in [
        (&data.train, &data.train_angles),
        (&data.test, &data.test_angles),
    ] {
        for (d, &angle) in set.domain_ids().into_iter().zip(set_angles) {
            let idx = set.domain_points(d).unwrap();
            let mean: Vec<f64> = block
                .clone()
                .map(|j| idx.iter().map(|&i| set.points()[i].x[j]).sum::<f64>() / idx.len() as f64)
                .collect();
            means.push(mean);
            angles.push(angle);
        }
    }
    let (mut closeness, mut sims) = (Vec::new(), Vec::new());
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            closeness.push(-(angles[i] - angles[j]).abs());
            sims.push(domi_core::kernel::cosine(&means[i], &means[j]).unwrap());
        }
    }
    let rho = spearman(&closeness, &sims).unwrap();
    assert!(rho > 0.8, "rho = {rho}");
}

#[test]
fn diverse_domains_train_better_linear_models() {
    let synth = generate(&SynthConfig {
        points_per_domain: 100,
        spurious_alignment: 0.5,
        domain_coupling: 0.5,
        ..Default::default()
    })
    .unwrap();
    let linear = TrainConfig {
        hidden_dims: vec![],
        ..Default::default()
    };
    let accuracy = |domains: &[u32], seed: u64| {
        let train = synth.train.restrict_to_domains(domains).unwrap();
        let model = train_erm(&train, &linear.with_seed(seed)).unwrap().model;
        model.accuracy(&synth.test, Target::Class)
    };
    let ids = synth.train.domain_ids();
    let (mut dpp, mut random) = (Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let one = level_one_sample(&synth.train, &level_one_cfg(seed)).unwrap();
        dpp.push(accuracy(&one.omega_domains, derive_seed(seed, "erm")));
        let picked = sample_random(ids.len(), 5, derive_seed(seed, "random")).unwrap();
        let domains: Vec<u32> = picked.indices.iter().map(|&i| ids[i]).collect();
        random.push(accuracy(&domains, derive_seed(seed, "erm")));
    }
    let p = permutation_test_greater(&dpp, &random, 2).unwrap();
    assert!(
        p < 0.05,
        "p = {p}, dpp {:?} random {:?}",
        stats::mean(&dpp),
        stats::mean(&random)
    );
}

#[test]
fn invdann_lists_are_more_robust_than_dann_lists() {
    let synth = generate(&SynthConfig {
        points_per_domain: 100,
        ..Default::default()
    })
    .unwrap();
    let wins = (0..10)
        .filter(|&seed| {
            let report = run_featurizer_comparison(
                &synth,
                &StudyConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            report.domain.sensitivity_score > report.object.sensitivity_score
        })
        .count();
    assert!(wins > 5, "{wins} of 10");
}
