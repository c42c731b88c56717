//! Variance and featurizer-comparison studies over synthetic domains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DomainDataset;
use crate::descriptions::{describe_domains, sensitivity_score};
use crate::dpp::{sample_kdpp, sample_random};
use crate::error::{DomiError, Result};
use crate::kernel::build_similarity_matrix;
use crate::nnet::{train_dann, train_erm, train_invdann, ErmModel, Mlp, Target, TrainConfig};
use crate::rng::derive_seed;
use crate::stats::{mean, population_variance};
use crate::synth::SynthData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMode {
    /// Every round draws a fresh uniform domain list.
    Random,
    /// After a uniform first list, each list is a k-DPP draw over domain
    /// descriptions from the previous round's featurizer.
    DppResample,
}

impl StudyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyMode::Random => "random",
            StudyMode::DppResample => "dpp-resample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub k_domains: usize,
    pub rounds: usize,
    pub repetitions: usize,
    /// Domains in the list that trains the DANN/invDANN featurizers of the
    /// comparison study.
    pub source_domains: usize,
    pub erm: TrainConfig,
    /// Training settings for the DANN and invDANN featurizers.
    pub adversarial: TrainConfig,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            k_domains: 5,
            rounds: 20,
            repetitions: 10,
            source_domains: 5,
            erm: TrainConfig::default(),
            adversarial: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl StudyConfig {
    fn validate(&self, n_domains: usize) -> Result<()> {
        if self.k_domains == 0 || self.k_domains > n_domains {
            return Err(DomiError::Config(format!(
                "k_domains = {} must lie in [1, {n_domains}]",
                self.k_domains
            )));
        }
        if self.rounds == 0 || self.repetitions == 0 {
            return Err(DomiError::Config(
                "rounds and repetitions must be positive".into(),
            ));
        }
        if self.source_domains < 2 || self.source_domains > n_domains {
            return Err(DomiError::Config(format!(
                "source_domains = {} must lie in [2, {n_domains}]",
                self.source_domains
            )));
        }
        self.erm.validate()?;
        self.adversarial.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub seed: u64,
    /// Domain list of each round.
    pub lists: Vec<Vec<u32>>,
    /// Test accuracy of each round's model, in `[0, 1]`.
    pub accuracies: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: StudyMode,
    pub seed: u64,
    pub repetitions: Vec<Repetition>,
    pub mean_variance: f64,
    pub mean_accuracy: f64,
}

impl ExperimentReport {
    pub fn variances(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.variance).collect()
    }
}

fn domains_subset(data: &DomainDataset, domains: &[u32]) -> Result<DomainDataset> {
    let mut sorted = domains.to_vec();
    sorted.sort_unstable();
    data.restrict_to_domains(&sorted)
}

fn select(ids: &[u32], indices: &[usize]) -> Vec<u32> {
    indices.iter().map(|&i| ids[i]).collect()
}

/// Draw `k` domains by k-DPP over descriptions from `featurizer`.
pub fn dpp_domain_list(
    featurizer: &Mlp,
    data: &DomainDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    let descriptions = describe_domains(featurizer, data, None, 0)?;
    let kernel = build_similarity_matrix(&descriptions)?;
    let sel = sample_kdpp(&kernel, k, seed)?;
    Ok(select(&data.domain_ids(), &sel.indices))
}

fn train_on(data: &SynthData, list: &[u32], cfg: &TrainConfig) -> Result<(ErmModel, f64)> {
    let subset = domains_subset(&data.train, list)?;
    let model = train_erm(&subset, cfg)?.model;
    let acc = model.accuracy(&data.test, Target::Class);
    Ok((model, acc))
}

fn run_repetition(
    data: &SynthData,
    cfg: &StudyConfig,
    mode: StudyMode,
    seed: u64,
) -> Result<Repetition> {
    let ids = data.train.domain_ids();
    let mut list = select(
        &ids,
        &sample_random(ids.len(), cfg.k_domains, derive_seed(seed, "init"))?.indices,
    );
    let mut lists = Vec::with_capacity(cfg.rounds);
    let mut accuracies = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let erm = cfg
            .erm
            .with_seed(derive_seed(seed, &format!("round/{round}/erm")));
        let (model, acc) = train_on(data, &list, &erm)?;
        lists.push(list.clone());
        accuracies.push(acc);
        if round + 1 == cfg.rounds {
            break;
        }
        let next_seed = derive_seed(seed, &format!("round/{round}/next"));
        list = match mode {
            StudyMode::Random => select(
                &ids,
                &sample_random(ids.len(), cfg.k_domains, next_seed)?.indices,
            ),
            StudyMode::DppResample => {
                dpp_domain_list(&model.featurizer, &data.train, cfg.k_domains, next_seed)?
            }
        };
    }
    let variance = population_variance(&accuracies);
    Ok(Repetition {
        seed,
        lists,
        accuracies,
        variance,
    })
}

/// Per repetition: `rounds` lists, one ERM model and test accuracy per list,
/// and the population variance of those accuracies.
///
/// Repetition `r` uses seed `derive_seed(cfg.seed, "repetition/r")` in both
/// modes, so the first list of each repetition is shared across modes.
pub fn run_variance_study(
    data: &SynthData,
    cfg: &StudyConfig,
    mode: StudyMode,
) -> Result<ExperimentReport> {
    cfg.validate(data.train.n_domains())?;
    let repetitions = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            run_repetition(
                data,
                cfg,
                mode,
                derive_seed(cfg.seed, &format!("repetition/{r}")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let variances: Vec<f64> = repetitions.iter().map(|r| r.variance).collect();
    let accs: Vec<f64> = repetitions
        .iter()
        .flat_map(|r| r.accuracies.iter().copied())
        .collect();
    Ok(ExperimentReport {
        mode,
        seed: cfg.seed,
        mean_variance: mean(&variances),
        mean_accuracy: mean(&accs),
        repetitions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListOutcome {
    pub featurizer: String,
    pub list: Vec<u32>,
    pub test_accuracy: f64,
    pub sensitivity_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub source_list: Vec<u32>,
    pub object: ListOutcome,
    pub domain: ListOutcome,
}

/// DANN (object) and invDANN (domain) featurizers trained on one random
/// source list each drive a k-DPP list; an ERM model per list is scored by
/// test accuracy and by the similarity sum of its descriptions of every
/// training domain.
pub fn run_featurizer_comparison(data: &SynthData, cfg: &StudyConfig) -> Result<ComparisonReport> {
    cfg.validate(data.train.n_domains())?;
    let ids = data.train.domain_ids();
    let seed = cfg.seed;
    let mut source_list = select(
        &ids,
        &sample_random(ids.len(), cfg.source_domains, derive_seed(seed, "source"))?.indices,
    );
    source_list.sort_unstable();
    let source = domains_subset(&data.train, &source_list)?;
    let adv = cfg.adversarial.with_seed(derive_seed(seed, "featurizer"));
    let object = train_dann(&source, &adv)?.model.featurizer;
    let domain = train_invdann(&source, &adv)?.model.featurizer;
    let erm = cfg.erm.with_seed(derive_seed(seed, "erm"));
    let outcome = |name: &str, featurizer: &Mlp| -> Result<ListOutcome> {
        let list = dpp_domain_list(
            featurizer,
            &data.train,
            cfg.k_domains,
            derive_seed(seed, &format!("{name}/dpp")),
        )?;
        let (model, test_accuracy) = train_on(data, &list, &erm)?;
        Ok(ListOutcome {
            featurizer: name.to_string(),
            list,
            test_accuracy,
            sensitivity_score: sensitivity_score(&model.featurizer, &data.train)?,
        })
    };
    Ok(ComparisonReport {
        seed,
        source_list,
        object: outcome("object", &object)?,
        domain: outcome("domain", &domain)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn tiny() -> (SynthData, StudyConfig) {
        let data = generate(&SynthConfig {
            n_domains: 12,
            points_per_domain: 20,
            test_points_per_domain: 20,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = StudyConfig {
            rounds: 3,
            repetitions: 2,
            k_domains: 3,
            source_domains: 4,
            erm: TrainConfig {
                epochs: 2,
                hidden_dims: vec![8],
                ..TrainConfig::default()
            },
            adversarial: TrainConfig {
                epochs: 2,
                hidden_dims: vec![8],
                ..TrainConfig::default()
            },
            seed: 5,
        };
        (data, cfg)
    }

    #[test]
    fn single_round_has_zero_variance() {
        let (data, cfg) = tiny();
        let cfg = StudyConfig { rounds: 1, ..cfg };
        for mode in [StudyMode::Random, StudyMode::DppResample] {
            let r = run_variance_study(&data, &cfg, mode).unwrap();
            assert!(r.repetitions.iter().all(|rep| rep.variance == 0.0));
        }
    }

    #[test]
    fn reports_are_reproducible_and_well_formed() {
        let (data, cfg) = tiny();
        for mode in [StudyMode::Random, StudyMode::DppResample] {
            let a = run_variance_study(&data, &cfg, mode).unwrap();
            assert_eq!(a, run_variance_study(&data, &cfg, mode).unwrap());
            for rep in &a.repetitions {
                assert_eq!(rep.accuracies.len(), 3);
                assert!(rep.accuracies.iter().all(|x| (0.0..=1.0).contains(x)));
                assert!(rep.lists.iter().all(|l| l.len() == 3));
                assert!(rep.variance >= 0.0);
            }
        }
    }

    #[test]
    fn comparison_lists_have_size_k() {
        let (data, cfg) = tiny();
        let r = run_featurizer_comparison(&data, &cfg).unwrap();
        assert_eq!(r.object.list.len(), 3);
        assert_eq!(r.domain.list.len(), 3);
        assert_eq!(r, run_featurizer_comparison(&data, &cfg).unwrap());
    }

    #[test]
    fn rejects_oversized_lists() {
        let (data, cfg) = tiny();
        let cfg = StudyConfig {
            k_domains: 13,
            ..cfg
        };
        assert!(run_variance_study(&data, &cfg, StudyMode::Random).is_err());
    }
}
