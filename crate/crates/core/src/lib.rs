//! Diversity-boosted two-level sampling.
//!
//! Determinantal point process samplers over learned domain and batch
//! descriptions, an adversarial featurizer engine (ERM, DANN and the
//! role-swapped invDANN), the two-level sampling pipeline, and the
//! harnesses used to study diversity against spurious correlations.

pub mod data;
pub mod descriptions;
pub mod domi;
pub mod dpp;
pub mod error;
pub mod kernel;
mod linalg;
pub mod nnet;
pub mod rng;
pub mod stats;
pub mod study;
pub mod synth;
pub mod toy;

pub use descriptions::{describe_batches, describe_domains, describe_set};
pub use domi::{domi_sample, form_batches, DomiConfig, DomiResult, SamplerMethod};
pub use dpp::{
    elementary_symmetric, greedy_map, sample_dpp, sample_kdpp, sample_random, subset_probability,
    SampleMethod, SampleSelection,
};
pub use error::{DomiError, Result};
pub use kernel::{
    build_similarity_matrix, cosine_similarity, sym_eig, Description, EigenDecomposition, Kernel,
};
pub use rng::{derive_seed, SeededRng};
pub use study::{
    run_featurizer_comparison, run_variance_study, ExperimentReport, StudyConfig, StudyMode,
};
pub use synth::{generate, SynthConfig, SynthData};
