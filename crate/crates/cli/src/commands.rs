//! Subcommand implementations.

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use domi_core::data::DomainDataset;
use domi_core::dpp::{greedy_map, sample_dpp_with, sample_kdpp_with, sample_random};
use domi_core::nnet::{train_dann, train_erm, train_invdann, TrainConfig};
use domi_core::stats::permutation_test_greater;
use domi_core::toy::run_toy_experiment;
use domi_core::{
    derive_seed, domi_sample, generate, run_featurizer_comparison, run_variance_study, DomiConfig,
    Kernel, StudyConfig, StudyMode, SynthConfig,
};

use crate::config::{config_json, load_config, render_config};
use crate::error::{CliError, Result};
use crate::format::{toy_csv, toy_json, toy_text};
use crate::manifest::{write_atomic, RunManifest};

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_kernel(path: &Path, kernel: &Kernel) -> Result<()> {
    let mut buf = Vec::new();
    kernel.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

fn write_dataset(path: &Path, data: &DomainDataset) -> Result<()> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

fn read_dataset(path: &Path) -> Result<DomainDataset> {
    Ok(DomainDataset::read_csv(open(path)?)?)
}

fn record_config<T: Serialize>(manifest: &mut RunManifest, cfg: &T) {
    manifest.config_text = render_config(cfg);
    manifest.config = config_json(cfg);
}

fn elapsed_ms(t: Instant) -> u128 {
    t.elapsed().as_millis()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DppMethod {
    Exact,
    Kdpp,
    Map,
    Random,
}

pub struct DppSample<'a> {
    pub kernel: &'a Path,
    pub k: Option<usize>,
    pub method: DppMethod,
    pub seed: u64,
    pub draws: usize,
}

pub fn dpp_sample(args: &DppSample, out: &mut dyn Write, manifest: &mut RunManifest) -> Result<()> {
    let t = Instant::now();
    let kernel = Kernel::read_csv(open(args.kernel)?)?;
    let k = match (args.method, args.k) {
        (DppMethod::Exact, Some(_)) => {
            return Err(CliError::Usage("--k is not used by --method exact".into()))
        }
        (DppMethod::Exact, None) => 0,
        (_, Some(k)) => k,
        (_, None) => {
            return Err(CliError::Usage(
                format!("--method {:?} needs --k", args.method).to_lowercase(),
            ))
        }
    };
    let eig = match args.method {
        DppMethod::Exact | DppMethod::Kdpp => Some(kernel.psd_eig()?),
        _ => None,
    };
    let map = match args.method {
        DppMethod::Map => Some(greedy_map(&kernel, k)?),
        _ => None,
    };
    for i in 0..args.draws {
        let seed = derive_seed(args.seed, &format!("draw/{i}"));
        let selection = match args.method {
            DppMethod::Exact => sample_dpp_with(eig.as_ref().unwrap(), seed),
            DppMethod::Kdpp => sample_kdpp_with(eig.as_ref().unwrap(), k, seed)?,
            DppMethod::Map => domi_core::dpp::SampleSelection {
                seed,
                ..map.clone().unwrap()
            },
            DppMethod::Random => sample_random(kernel.len(), k, seed)?,
        };
        writeln!(out, "{}", serde_json::to_string(&selection)?)?;
    }
    manifest.config = json!({
        "kernel": args.kernel.display().to_string(),
        "k": args.k,
        "method": format!("{:?}", args.method).to_lowercase(),
        "draws": args.draws,
    });
    manifest.artifacts.push(args.kernel.display().to_string());
    manifest.timings_ms.insert("total".into(), elapsed_ms(t));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Erm,
    Dann,
    Invdann,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainCommandConfig {
    pub objective: Objective,
    pub training: TrainConfig,
}

pub fn train(
    data: &Path,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let t = Instant::now();
    let cfg: TrainCommandConfig = load_config(config)?;
    record_config(manifest, &cfg);
    let training = cfg.training.with_seed(seed);
    let dataset = read_dataset(data)?;
    let result = match cfg.objective {
        Objective::Erm => serde_json::to_value(train_erm(&dataset, &training)?)?,
        Objective::Dann => serde_json::to_value(train_dann(&dataset, &training)?)?,
        Objective::Invdann => serde_json::to_value(train_invdann(&dataset, &training)?)?,
    };
    write_json(
        out,
        &json!({ "objective": cfg.objective, "result": result }),
    )?;
    manifest.artifacts.push(out.display().to_string());
    manifest.timings_ms.insert("total".into(), elapsed_ms(t));
    Ok(())
}

pub fn domi(
    data: &Path,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let t = Instant::now();
    let cfg = DomiConfig {
        seed,
        ..load_config(config)?
    };
    record_config(manifest, &cfg);
    let dataset = read_dataset(data)?;
    let result = domi_sample(&dataset, &cfg)?;
    std::fs::create_dir_all(out).map_err(|source| CliError::File {
        path: out.display().to_string(),
        source,
    })?;
    let omega = json!({
        "domains": result.omega_domains,
        "indices": result.omega.indices,
        "method": result.omega.method,
        "seed": result.omega.seed,
        "training_domains": result.training_domains,
    });
    let batches = json!({
        "n_batches": result.n_batches,
        "selected": result.batches.indices,
        "method": result.batches.method,
        "seed": result.batches.seed,
        "members": result.batch_members,
    });
    let mut path = |name: &str| {
        let p = out.join(name);
        manifest.artifacts.push(p.display().to_string());
        p
    };
    write_json(&path("omega.json"), &omega)?;
    write_json(&path("batches.json"), &batches)?;
    write_kernel(&path("L_d.csv"), &result.kernel_domains)?;
    write_kernel(&path("L_b.csv"), &result.kernel_batches)?;
    write_json(&path("featurizer1.json"), &result.featurizer1)?;
    write_json(&path("featurizer2.json"), &result.featurizer2)?;
    let timings = &mut manifest.timings_ms;
    timings.insert("level1".into(), result.provenance.level1_ms);
    timings.insert("level2".into(), result.provenance.level2_ms);
    timings.insert("total".into(), elapsed_ms(t));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ToyFormat {
    Text,
    Json,
    Csv,
}

pub fn toy(
    draws: usize,
    seed: u64,
    format: ToyFormat,
    out: &mut dyn Write,
    manifest: &mut RunManifest,
) -> Result<()> {
    let t = Instant::now();
    let report = run_toy_experiment(draws, seed)?;
    let text = match format {
        ToyFormat::Text => toy_text(&report),
        ToyFormat::Json => toy_json(&report)?,
        ToyFormat::Csv => toy_csv(&report),
    };
    out.write_all(text.as_bytes())?;
    manifest.config = json!({
        "draws": draws,
        "format": format!("{format:?}").to_lowercase(),
    });
    manifest.timings_ms.insert("total".into(), elapsed_ms(t));
    Ok(())
}

/// Path of the test split written next to `out`.
pub fn test_split_path(out: &Path) -> PathBuf {
    out.with_extension("test.csv")
}

pub fn synth_gen(
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let t = Instant::now();
    let cfg = SynthConfig {
        seed,
        ..load_config(config)?
    };
    record_config(manifest, &cfg);
    let data = generate(&cfg)?;
    let test_out = test_split_path(out);
    write_dataset(out, &data.train)?;
    write_dataset(&test_out, &data.test)?;
    manifest.artifacts.push(out.display().to_string());
    manifest.artifacts.push(test_out.display().to_string());
    manifest.timings_ms.insert("total".into(), elapsed_ms(t));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub study: StudyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentKind {
    Variance,
    FeaturizerCompare,
}

pub fn experiment(
    kind: ExperimentKind,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let t = Instant::now();
    let mut cfg: ExperimentConfig = load_config(config)?;
    cfg.synth.seed = seed;
    cfg.study.seed = seed;
    record_config(manifest, &cfg);
    let data = generate(&cfg.synth)?;
    let report = match kind {
        ExperimentKind::Variance => {
            let random = run_variance_study(&data, &cfg.study, StudyMode::Random)?;
            let dpp = run_variance_study(&data, &cfg.study, StudyMode::DppResample)?;
            let p_value = permutation_test_greater(
                &dpp.variances(),
                &random.variances(),
                derive_seed(seed, "permutation"),
            )?;
            json!({ "random": random, "dpp_resample": dpp, "p_value": p_value })
        }
        ExperimentKind::FeaturizerCompare => {
            serde_json::to_value(run_featurizer_comparison(&data, &cfg.study)?)?
        }
    };
    write_json(out, &report)?;
    manifest.artifacts.push(out.display().to_string());
    manifest.timings_ms.insert("total".into(), elapsed_ms(t));
    Ok(())
}
