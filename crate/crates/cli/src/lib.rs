//! `domi` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Every run writes a
//! [`RunManifest`]; see [`manifest_path`] for its default location.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{DppMethod, ExperimentConfig, ExperimentKind, ToyFormat, TrainCommandConfig};
use config::describe_keys;
use domi_core::{DomiConfig, SynthConfig};
use error::{CliError, Result};
pub use manifest::RunManifest;

pub const THREADS_ENV: &str = "DOMI_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "domi",
    version,
    about = "Diverse two-level domain and batch sampling"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads for internal parallelism [env: DOMI_THREADS].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Where to write the run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw subsets from a kernel CSV; prints one JSON line per draw.
    DppSample {
        #[arg(long)]
        kernel: PathBuf,
        /// Subset size (not used by `exact`).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "kdpp")]
        method: DppMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        draws: usize,
    },
    /// Train an ERM, DANN or invDANN model on a dataset CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both sampling levels and write the selection to a directory.
    DomiSample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded draws over the 12-point toy dataset, with exact expectations.
    Toy {
        #[arg(long, default_value_t = 30)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: ToyFormat,
    },
    /// Generate the synthetic rotated dataset; the test split goes to `<out stem>.test.csv`.
    SynthGen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variance study or featurizer comparison on synthetic data.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DppSample { .. } => "dpp-sample",
            Command::Train { .. } => "train",
            Command::DomiSample { .. } => "domi-sample",
            Command::Toy { .. } => "toy",
            Command::SynthGen { .. } => "synth-gen",
            Command::Experiment { .. } => "experiment",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Command::DppSample { seed, .. }
            | Command::Train { seed, .. }
            | Command::DomiSample { seed, .. }
            | Command::Toy { seed, .. }
            | Command::SynthGen { seed, .. }
            | Command::Experiment { seed, .. } => *seed,
        }
    }
}

fn command() -> clap::Command {
    Cli::command()
        .mut_subcommand("train", |c| {
            c.after_long_help(describe_keys::<TrainCommandConfig>())
        })
        .mut_subcommand("domi-sample", |c| {
            c.after_long_help(describe_keys::<DomiConfig>())
        })
        .mut_subcommand("synth-gen", |c| {
            c.after_long_help(describe_keys::<SynthConfig>())
        })
        .mut_subcommand("experiment", |c| {
            c.after_long_help(describe_keys::<ExperimentConfig>())
        })
}

/// Default manifest location: `<dir>/manifest.json` for directory outputs,
/// `<file>.manifest.json` for file outputs, `domi-<command>.manifest.json`
/// in the working directory for commands that print to stdout.
pub fn manifest_path(cmd: &Command) -> PathBuf {
    match cmd {
        Command::DomiSample { out, .. } => out.join("manifest.json"),
        Command::Train { out, .. }
        | Command::SynthGen { out, .. }
        | Command::Experiment { out, .. } => {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        }
        other => PathBuf::from(format!("domi-{}.manifest.json", other.name())),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A pool that already exists (repeated in-process calls) is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn dispatch(cli: &Cli, argv: Vec<String>, stdout: &mut dyn Write) -> Result<()> {
    configure_threads(cli.threads)?;
    let cmd = &cli.command;
    let mut manifest = RunManifest::new(cmd.name(), argv, cmd.seed());
    match cmd {
        Command::DppSample {
            kernel,
            k,
            method,
            seed,
            draws,
        } => commands::dpp_sample(
            &commands::DppSample {
                kernel,
                k: *k,
                method: *method,
                seed: *seed,
                draws: *draws,
            },
            stdout,
            &mut manifest,
        )?,
        Command::Train {
            data,
            config,
            seed,
            out,
        } => commands::train(data, config.as_deref(), *seed, out, &mut manifest)?,
        Command::DomiSample {
            data,
            config,
            seed,
            out,
        } => commands::domi(data, config.as_deref(), *seed, out, &mut manifest)?,
        Command::Toy {
            draws,
            seed,
            format,
        } => commands::toy(*draws, *seed, *format, stdout, &mut manifest)?,
        Command::SynthGen { config, seed, out } => {
            commands::synth_gen(config.as_deref(), *seed, out, &mut manifest)?
        }
        Command::Experiment {
            kind,
            config,
            seed,
            out,
        } => commands::experiment(*kind, config.as_deref(), *seed, out, &mut manifest)?,
    }
    let path = cli.manifest.clone().unwrap_or_else(|| manifest_path(cmd));
    manifest.write(&path)
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let matches = match command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    1
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return 1;
        }
    };
    let argv = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(&cli, argv, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(stderr, "{}", command().render_usage());
            }
            e.exit_code()
        }
    }
}
