//! Two-level diverse sampling.
//!
//! Level one trains an invDANN featurizer on a seeded subset of domains
//! (capped points per domain), describes every domain by its mean feature,
//! and draws a diverse set of domains `Ω` from the cosine kernel `L_d`.
//! Level two trains an ERM featurizer on `Ω`'s data, cuts the pooled data
//! into shuffled fixed-size batches, describes each batch, and keeps `δ`
//! diverse batches drawn from `L_b`.
//!
//! Seeds for every stage derive from `DomiConfig::seed`; the `seed` fields
//! of the nested training configs are ignored.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::DomainDataset;
use crate::descriptions::{describe_batches, describe_domains};
use crate::dpp::{greedy_map, sample_kdpp, sample_random, SampleSelection};
use crate::error::{DomiError, Result};
use crate::kernel::{build_similarity_matrix, Kernel};
use crate::nnet::{train_erm, train_invdann, Mlp, TrainConfig};
use crate::rng::{derive_seed, SeededRng};

/// How fixed-size diverse subsets are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    /// Exact k-DPP draw.
    Kdpp,
    /// Deterministic greedy log-det maximization.
    Map,
}

impl SamplerMethod {
    pub fn draw(self, kernel: &Kernel, k: usize, seed: u64) -> Result<SampleSelection> {
        match self {
            SamplerMethod::Kdpp => sample_kdpp(kernel, k, seed),
            SamplerMethod::Map => greedy_map(kernel, k).map(|s| SampleSelection { seed, ..s }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOneConfig {
    /// Domains used to train the invDANN featurizer.
    pub train_domain_count: usize,
    /// Points per training domain.
    pub per_domain_cap: usize,
    /// Size of `Ω`.
    pub k_domains: usize,
    pub invdann: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTwoConfig {
    pub batch_size: usize,
    /// Number of batches kept (`δ`).
    pub delta: usize,
    pub erm: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomiConfig {
    pub level1: LevelOneConfig,
    pub level2: LevelTwoConfig,
    pub sampler: SamplerMethod,
    pub seed: u64,
}

impl Default for DomiConfig {
    fn default() -> Self {
        Self {
            level1: LevelOneConfig {
                train_domain_count: 40,
                per_domain_cap: 750,
                k_domains: 5,
                invdann: TrainConfig::default(),
            },
            level2: LevelTwoConfig {
                batch_size: 64,
                delta: 115,
                erm: TrainConfig {
                    hidden_dims: vec![128, 128],
                    ..TrainConfig::default()
                },
            },
            sampler: SamplerMethod::Kdpp,
            seed: 0,
        }
    }
}

impl DomiConfig {
    /// Checks that only need the dataset shape (batch counts are checked in level two).
    pub fn validate_against(&self, data: &DomainDataset) -> Result<()> {
        let n = data.n_domains();
        let l1 = &self.level1;
        if n < 2 {
            return Err(DomiError::Config(format!(
                "need at least 2 domains, found {n}"
            )));
        }
        if data.distinct_classes() < 2 {
            return Err(DomiError::Config("need at least 2 classes".into()));
        }
        if l1.train_domain_count < 2 || l1.train_domain_count > n {
            return Err(DomiError::Config(format!(
                "train_domain_count = {} must lie in [2, {n}]",
                l1.train_domain_count
            )));
        }
        if l1.k_domains == 0 || l1.k_domains > n {
            return Err(DomiError::Config(format!(
                "k_domains = {} must lie in [1, {n}]",
                l1.k_domains
            )));
        }
        if l1.per_domain_cap == 0 {
            return Err(DomiError::Config("per_domain_cap must be positive".into()));
        }
        if self.level2.batch_size == 0 {
            return Err(DomiError::Config("batch_size must be positive".into()));
        }
        if self.level2.delta == 0 {
            return Err(DomiError::Config("delta must be positive".into()));
        }
        l1.invdann.validate()?;
        self.level2.erm.validate()
    }
}

#[derive(Debug, Clone)]
pub struct LevelOne {
    /// Indices into `data.domain_ids()`.
    pub omega: SampleSelection,
    /// Domain labels of `omega`, in selection order.
    pub omega_domains: Vec<u32>,
    /// Domains whose (capped) data trained the featurizer.
    pub training_domains: Vec<u32>,
    pub featurizer: Mlp,
    pub kernel: Kernel,
}

#[derive(Debug, Clone)]
pub struct LevelTwo {
    /// Indices into the batch list.
    pub selection: SampleSelection,
    /// Every batch, as indices into the restricted dataset.
    pub batches: Vec<Vec<usize>>,
    pub featurizer: Mlp,
    pub kernel: Kernel,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub level1_seed: u64,
    pub level2_seed: u64,
    pub level1_ms: u128,
    pub level2_ms: u128,
}

#[derive(Debug, Clone)]
pub struct DomiResult {
    pub omega: SampleSelection,
    pub omega_domains: Vec<u32>,
    pub training_domains: Vec<u32>,
    pub batches: SampleSelection,
    pub n_batches: usize,
    /// Members of each selected batch (in selection order) as indices into
    /// the input dataset.
    pub batch_members: Vec<Vec<usize>>,
    pub featurizer1: Mlp,
    pub featurizer2: Mlp,
    pub kernel_domains: Kernel,
    pub kernel_batches: Kernel,
    pub provenance: Provenance,
}

/// Train invDANN on a capped domain subset and draw `Ω` from `L_d`.
pub fn level_one_sample(data: &DomainDataset, cfg: &DomiConfig) -> Result<LevelOne> {
    cfg.validate_against(data)?;
    let seed = derive_seed(cfg.seed, "level1");
    let l1 = &cfg.level1;
    let domains = data.domain_ids();

    let picked = sample_random(
        domains.len(),
        l1.train_domain_count,
        derive_seed(seed, "domains"),
    )?;
    let mut training_domains: Vec<u32> = picked.indices.iter().map(|&i| domains[i]).collect();
    training_domains.sort_unstable();
    let mut train_idx = Vec::new();
    for &d in &training_domains {
        let mut idx = data.domain_points(d).unwrap().to_vec();
        if l1.per_domain_cap < idx.len() {
            let mut rng = SeededRng::for_stage(seed, &format!("points/{d}"));
            rng.partial_shuffle(&mut idx, l1.per_domain_cap);
            idx.truncate(l1.per_domain_cap);
            idx.sort_unstable();
        }
        train_idx.extend(idx);
    }
    let train_set = data.subset(&train_idx)?;
    if train_set.distinct_classes() < 2 {
        return Err(DomiError::Config(
            "level-one training subset contains a single class".into(),
        ));
    }
    let trained = train_invdann(
        &train_set,
        &l1.invdann.with_seed(derive_seed(seed, "invdann")),
    )?;
    let featurizer = trained.model.featurizer;

    let descriptions = describe_domains(&featurizer, data, None, 0)?;
    let kernel = build_similarity_matrix(&descriptions)?;
    let omega = cfg
        .sampler
        .draw(&kernel, l1.k_domains, derive_seed(seed, "dpp"))?;
    let omega_domains = omega.indices.iter().map(|&i| domains[i]).collect();
    Ok(LevelOne {
        omega,
        omega_domains,
        training_domains,
        featurizer,
        kernel,
    })
}

/// Seeded shuffle of all points, cut into consecutive chunks of
/// `batch_size`; the final short batch is kept.
pub fn form_batches(n_points: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(DomiError::InvalidArgument(
            "batch_size must be positive".into(),
        ));
    }
    if n_points == 0 {
        return Err(DomiError::InvalidArgument("no points to batch".into()));
    }
    let mut order: Vec<usize> = (0..n_points).collect();
    SeededRng::new(seed).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Train ERM on `restricted`, batch it, and keep `δ` diverse batches.
///
/// When `δ` equals the batch count every batch is kept without sampling.
pub fn level_two_sample(restricted: &DomainDataset, cfg: &DomiConfig) -> Result<LevelTwo> {
    let seed = derive_seed(cfg.seed, "level2");
    let l2 = &cfg.level2;
    let batches = form_batches(
        restricted.len(),
        l2.batch_size,
        derive_seed(seed, "batches"),
    )?;
    if l2.delta > batches.len() {
        return Err(DomiError::Config(format!(
            "delta = {} exceeds the {} batches formed over omega",
            l2.delta,
            batches.len()
        )));
    }
    let trained = train_erm(restricted, &l2.erm.with_seed(derive_seed(seed, "erm")))?;
    let featurizer = trained.model.featurizer;
    let descriptions = describe_batches(&featurizer, restricted, &batches)?;
    let kernel = build_similarity_matrix(&descriptions)?;
    let dpp_seed = derive_seed(seed, "dpp");
    let selection = if l2.delta == batches.len() {
        SampleSelection {
            indices: (0..batches.len()).collect(),
            method: cfg.sampler.draw(&Kernel::identity(1), 1, dpp_seed)?.method,
            seed: dpp_seed,
        }
    } else {
        cfg.sampler.draw(&kernel, l2.delta, dpp_seed)?
    };
    Ok(LevelTwo {
        selection,
        batches,
        featurizer,
        kernel,
    })
}

/// Full pipeline.
pub fn domi_sample(data: &DomainDataset, cfg: &DomiConfig) -> Result<DomiResult> {
    let t0 = Instant::now();
    let one = level_one_sample(data, cfg)?;
    let level1_ms = t0.elapsed().as_millis();

    let t1 = Instant::now();
    let mut omega_sorted = one.omega_domains.clone();
    omega_sorted.sort_unstable();
    let original: Vec<usize> = data
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| omega_sorted.binary_search(&p.domain).is_ok())
        .map(|(i, _)| i)
        .collect();
    let restricted = data.subset(&original)?;
    let two = level_two_sample(&restricted, cfg)?;
    let level2_ms = t1.elapsed().as_millis();

    let batch_members = two
        .selection
        .indices
        .iter()
        .map(|&b| two.batches[b].iter().map(|&r| original[r]).collect())
        .collect();
    Ok(DomiResult {
        omega: one.omega,
        omega_domains: one.omega_domains,
        training_domains: one.training_domains,
        n_batches: two.batches.len(),
        batches: two.selection,
        batch_members,
        featurizer1: one.featurizer,
        featurizer2: two.featurizer,
        kernel_domains: one.kernel,
        kernel_batches: two.kernel,
        provenance: Provenance {
            seed: cfg.seed,
            level1_seed: derive_seed(cfg.seed, "level1"),
            level2_seed: derive_seed(cfg.seed, "level2"),
            level1_ms,
            level2_ms,
        },
    })
}

/// Mean kernel entry over unordered distinct pairs of `indices`.
pub fn mean_pairwise_similarity(kernel: &Kernel, indices: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            total += kernel.get(i, j);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}
