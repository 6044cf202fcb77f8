//! `triplemine`: score, classify and mine commonsense triples with masked
//! language model PMI.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "triplemine", version, about = "Unsupervised commonsense triple scoring")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` file with defaults for any of these flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Masked model: http(s)://host:port, lookup:PATH or uniform:VOCAB.
    #[arg(long, global = true, env = "TM_MASKED_URL")]
    pub masked_endpoint: Option<String>,
    /// Causal model used to rank candidate sentences.
    #[arg(long, global = true, env = "TM_CAUSAL_URL")]
    pub causal_endpoint: Option<String>,
    /// concat, template, template+grammar or coherency.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Fixed PMI weight. Classification searches a grid when unset.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory of the persistent score cache.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Warn about malformed input lines instead of failing.
    #[arg(long, global = true)]
    pub skip_bad_records: bool,
    /// Worker threads for scoring.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Concurrent requests per remote backend.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    /// Coherency length normalization: none or per-word.
    #[arg(long, global = true)]
    pub normalization: Option<String>,
    /// Extra randomly started mixture fits.
    #[arg(long, global = true)]
    pub gmm_restarts: Option<usize>,
    #[arg(long, global = true)]
    pub lambda_min: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_max: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_points: Option<usize>,
    /// Output format: tsv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Triple file, or `-` for stdin.
    pub input: PathBuf,
    /// ckbc (relation, head, tail, label) or candidate (relation, head, tail).
    #[arg(long)]
    pub input_format: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the sentence chosen for each triple.
    Generate(InputArgs),
    /// Score triples at a fixed weight.
    Score(InputArgs),
    /// Split labeled triples into valid and invalid and report F1.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        /// Treat the input as valid triples and add one sampled negative per triple.
        #[arg(long)]
        sample_negatives: bool,
    },
    /// Rank candidate triples and keep the best.
    Mine {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 100)]
        top_k: usize,
        /// Randomly sample at most this many candidates per relation first.
        #[arg(long)]
        per_relation: Option<usize>,
    },
    /// Report the mixture AIC at every grid weight.
    TuneLambda(InputArgs),
    /// Check that the configured backends answer.
    ServeCheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = Settings::resolve(&cli.global)
        .map_err(Failure::config)
        .and_then(|settings| commands::run(&cli.command, &settings));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
