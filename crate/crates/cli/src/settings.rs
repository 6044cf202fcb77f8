use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use triplemine_core::cluster::LambdaGrid;
use triplemine_core::coherency::LengthNormalization;
use triplemine_core::generate::GenerationMode;
use triplemine_core::pipeline::{parse_config_file, ExportFormat};

use crate::GlobalArgs;

/// Options after merging flags (and their environment variables) over the
/// config file over built-in defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub masked: Option<String>,
    pub causal: Option<String>,
    pub mode: GenerationMode,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub skip_bad_records: bool,
    pub concurrency: usize,
    pub max_in_flight: usize,
    pub normalization: LengthNormalization,
    pub gmm_restarts: usize,
    pub grid: LambdaGrid,
    pub format: ExportFormat,
    pub output: Option<PathBuf>,
}

const KNOWN_KEYS: [&str; 15] = [
    "masked-endpoint",
    "causal-endpoint",
    "mode",
    "lambda",
    "seed",
    "cache-dir",
    "skip-bad-records",
    "concurrency",
    "max-in-flight",
    "normalization",
    "gmm-restarts",
    "lambda-min",
    "lambda-max",
    "lambda-points",
    "format",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| anyhow!("{key}: invalid value {raw:?}: {e}"))
}

fn parse_normalization(raw: &str) -> Result<LengthNormalization> {
    match raw {
        "none" => Ok(LengthNormalization::None),
        "per-word" => Ok(LengthNormalization::PerWord),
        other => bail!("normalization: expected none or per-word, got {other:?}"),
    }
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("{key}: expected true or false, got {other:?}"),
    }
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Settings> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(key) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            bail!("unknown config key {key:?}");
        }
        let from_file = |key: &str| file.get(key).map(String::as_str);

        fn pick<T: FromStr>(flag: Option<T>, key: &str, file: Option<&str>, default: T) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            match (flag, file) {
                (Some(v), _) => Ok(v),
                (None, Some(raw)) => parse_value(key, raw),
                (None, None) => Ok(default),
            }
        }

        let mode = match (&args.mode, from_file("mode")) {
            (Some(m), _) => m.parse::<GenerationMode>()?,
            (None, Some(raw)) => raw.parse::<GenerationMode>()?,
            (None, None) => GenerationMode::Coherency,
        };
        let lambda = match (args.lambda, from_file("lambda")) {
            (Some(l), _) => Some(l),
            (None, Some(raw)) => Some(parse_value("lambda", raw)?),
            (None, None) => None,
        };
        if let Some(l) = lambda {
            if !(l.is_finite() && l >= 0.0) {
                bail!("lambda must be a non-negative number, got {l}");
            }
        }
        let normalization = match (&args.normalization, from_file("normalization")) {
            (Some(n), _) => parse_normalization(n)?,
            (None, Some(raw)) => parse_normalization(raw)?,
            (None, None) => LengthNormalization::None,
        };
        let skip_bad_records = args.skip_bad_records
            || from_file("skip-bad-records")
                .map(|v| parse_bool("skip-bad-records", v))
                .transpose()?
                .unwrap_or(false);
        let format = match (&args.format, from_file("format")) {
            (Some(f), _) => f.parse::<ExportFormat>().map_err(|e| anyhow!(e))?,
            (None, Some(raw)) => raw.parse::<ExportFormat>().map_err(|e| anyhow!(e))?,
            (None, None) => ExportFormat::Tsv,
        };
        let defaults = LambdaGrid::default();
        let grid = LambdaGrid {
            lo: pick(args.lambda_min, "lambda-min", from_file("lambda-min"), defaults.lo)?,
            hi: pick(args.lambda_max, "lambda-max", from_file("lambda-max"), defaults.hi)?,
            points: pick(
                args.lambda_points,
                "lambda-points",
                from_file("lambda-points"),
                defaults.points,
            )?,
        };
        grid.validate()?;
        let concurrency = pick(args.concurrency, "concurrency", from_file("concurrency"), 4)?;
        let max_in_flight = pick(args.max_in_flight, "max-in-flight", from_file("max-in-flight"), 8)?;
        if concurrency == 0 || max_in_flight == 0 {
            bail!("concurrency and max-in-flight must be at least 1");
        }

        Ok(Settings {
            masked: args
                .masked_endpoint
                .clone()
                .or_else(|| from_file("masked-endpoint").map(str::to_owned)),
            causal: args
                .causal_endpoint
                .clone()
                .or_else(|| from_file("causal-endpoint").map(str::to_owned)),
            mode,
            lambda,
            seed: pick(args.seed, "seed", from_file("seed"), 0)?,
            cache_dir: args
                .cache_dir
                .clone()
                .or_else(|| from_file("cache-dir").map(PathBuf::from)),
            skip_bad_records,
            concurrency,
            max_in_flight,
            normalization,
            gmm_restarts: pick(args.gmm_restarts, "gmm-restarts", from_file("gmm-restarts"), 0)?,
            grid,
            format,
            output: args.output.clone(),
        })
    }
}
