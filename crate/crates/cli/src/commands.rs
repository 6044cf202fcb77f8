use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::sync::Arc;

use anyhow::anyhow;
use triplemine_core::backend::{
    BackendDescriptor, BackendError, BackendRegistry, CachedModel, LanguageModel, RemoteOptions, ScoreCache,
};
use triplemine_core::cluster::tune_lambda_grid;
use triplemine_core::generate::{GeneratorContext, GeneratorRegistry};
use triplemine_core::pipeline::{
    export_report, run_score, run_task1, run_task2, score_triples, with_negatives, ExportFormat, LambdaSpec,
    MineOptions, Models, PipelineError, Report, RunConfig, DEFAULT_MINING_LAMBDA,
};
use triplemine_core::templates::TemplateRegistry;
use triplemine_core::triple::{read_records, LabeledTriple, Record, Triple, TripleFormat};

use crate::settings::Settings;
use crate::{Command, InputArgs};

const DATA: u8 = 1;
const BACKEND: u8 = 2;
const CONFIG: u8 = 3;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: CONFIG,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: DATA,
            error: error.into(),
        }
    }

    fn backend(error: BackendError) -> Self {
        let code = match error {
            BackendError::UnknownKind(_) | BackendError::InvalidQuery(_) => CONFIG,
            _ => BACKEND,
        };
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Backends {
    masked: Option<Arc<dyn LanguageModel>>,
    causal: Option<Arc<dyn LanguageModel>>,
    cached: Vec<Arc<CachedModel>>,
}

impl Backends {
    fn open(settings: &Settings) -> CliResult<Backends> {
        let registry = BackendRegistry::with_builtins();
        let opts = RemoteOptions {
            max_in_flight: settings.max_in_flight,
            ..RemoteOptions::default()
        };
        let cache = match &settings.cache_dir {
            Some(dir) => Some(Arc::new(ScoreCache::open(dir).map_err(Failure::backend)?)),
            None => None,
        };
        let mut cached = Vec::new();
        let mut open = |spec: &Option<String>| -> CliResult<Option<Arc<dyn LanguageModel>>> {
            let Some(spec) = spec else { return Ok(None) };
            let descriptor = BackendDescriptor::parse(spec).map_err(Failure::backend)?;
            let model = registry.open(&descriptor, &opts).map_err(Failure::backend)?;
            Ok(Some(match &cache {
                Some(cache) => {
                    let wrapped = Arc::new(CachedModel::new(model, Arc::clone(cache)));
                    cached.push(Arc::clone(&wrapped));
                    wrapped
                }
                None => model,
            }))
        };
        let masked = open(&settings.masked)?;
        let causal = open(&settings.causal)?;
        Ok(Backends { masked, causal, cached })
    }

    fn models(&self) -> CliResult<Models> {
        let masked = self
            .masked
            .clone()
            .ok_or_else(|| Failure::config(anyhow!("no masked model: set --masked-endpoint or TM_MASKED_URL")))?;
        Ok(Models {
            masked: masked as _,
            causal: self.causal.clone().map(|c| c as _),
        })
    }

    fn log_stats(&self) {
        for c in &self.cached {
            let s = c.stats();
            log::info!("score cache: {} hits, {} misses", s.hits, s.misses);
        }
    }
}

fn run_config(settings: &Settings, lambda: LambdaSpec) -> RunConfig {
    RunConfig {
        mode: settings.mode,
        lambda,
        seed: settings.seed,
        concurrency: settings.concurrency,
        normalization: settings.normalization,
        gmm_restarts: settings.gmm_restarts,
    }
}

fn read_input(args: &InputArgs, default: TripleFormat, settings: &Settings) -> CliResult<Vec<Record>> {
    let format = match &args.input_format {
        Some(f) => f.parse::<TripleFormat>().map_err(|e| Failure::config(anyhow!(e)))?,
        None => default,
    };
    let reader: Box<dyn BufRead> = if args.input.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        let file = File::open(&args.input).map_err(|e| Failure::data(anyhow!("{}: {e}", args.input.display())))?;
        Box::new(BufReader::new(file))
    };
    let (records, skipped) = read_records(reader, format, TemplateRegistry::bundled(), settings.skip_bad_records)
        .map_err(|e| Failure::data(anyhow!("{}: {e}", args.input.display())))?;
    if !skipped.is_empty() {
        log::warn!("skipped {} malformed records", skipped.len());
    }
    Ok(records)
}

fn triples(records: Vec<Record>) -> Vec<Triple> {
    records.iter().map(|r| r.triple().clone()).collect()
}

fn output(settings: &Settings) -> CliResult<Box<dyn Write>> {
    Ok(match &settings.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::data(anyhow!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_report(settings: &Settings, report: &Report) -> CliResult {
    let mut out = output(settings)?;
    export_report(report, &mut out, settings.format)?;
    out.flush().map_err(Failure::data)
}

pub fn run(command: &Command, settings: &Settings) -> CliResult {
    let backends = Backends::open(settings)?;
    let result = dispatch(command, settings, &backends);
    backends.log_stats();
    result
}

fn dispatch(command: &Command, settings: &Settings, backends: &Backends) -> CliResult {
    let templates = TemplateRegistry::bundled();
    match command {
        Command::Generate(input) => generate(settings, backends, input),
        Command::Score(input) => {
            let triples = triples(read_input(input, TripleFormat::CandidateTsv, settings)?);
            let cfg = run_config(settings, LambdaSpec::Fixed(settings.lambda.unwrap_or(1.0)));
            write_report(settings, &run_score(&cfg, &backends.models()?, templates, &triples)?)
        }
        Command::Classify {
            input,
            sample_negatives,
        } => {
            let data = if *sample_negatives {
                let records = read_input(input, TripleFormat::CandidateTsv, settings)?;
                let valid: Vec<Triple> = records
                    .into_iter()
                    .filter_map(|r| match r {
                        Record::Labeled(LabeledTriple { triple, label: true }) | Record::Candidate(triple) => {
                            Some(triple)
                        }
                        Record::Labeled(_) => None,
                    })
                    .collect();
                with_negatives(&valid, settings.seed)?
            } else {
                read_input(input, TripleFormat::CkbcTsv, settings)?
                    .into_iter()
                    .map(|r| match r {
                        Record::Labeled(l) => Ok(l),
                        Record::Candidate(t) => Err(Failure::config(anyhow!(
                            "{t} has no label; use --input-format ckbc or --sample-negatives"
                        ))),
                    })
                    .collect::<CliResult<Vec<_>>>()?
            };
            let lambda = settings
                .lambda
                .map_or(LambdaSpec::Grid(settings.grid), LambdaSpec::Fixed);
            let report = run_task1(&run_config(settings, lambda), &backends.models()?, templates, &data)?;
            if let Some(f1) = report.f1 {
                log::info!("F1 {f1:.4} at lambda {:.4}", report.lambda);
            }
            write_report(settings, &report)
        }
        Command::Mine {
            input,
            top_k,
            per_relation,
        } => {
            let candidates = triples(read_input(input, TripleFormat::CandidateTsv, settings)?);
            let cfg = run_config(
                settings,
                LambdaSpec::Fixed(settings.lambda.unwrap_or(DEFAULT_MINING_LAMBDA)),
            );
            let opts = MineOptions {
                top_k: *top_k,
                per_relation: *per_relation,
            };
            write_report(
                settings,
                &run_task2(&cfg, &backends.models()?, templates, &candidates, opts)?,
            )
        }
        Command::TuneLambda(input) => tune_lambda(settings, backends, input),
        Command::ServeCheck => serve_check(settings, backends),
    }
}

fn generate(settings: &Settings, backends: &Backends, input: &InputArgs) -> CliResult {
    let triples = triples(read_input(input, TripleFormat::CandidateTsv, settings)?);
    let ctx = GeneratorContext {
        normalization: settings.normalization,
        ..GeneratorContext::bundled(backends.causal.clone().map(|c| c as _))
    };
    let generator = GeneratorRegistry::with_builtins()
        .build(settings.mode.name(), &ctx)
        .map_err(Failure::config)?;
    let mut out = output(settings)?;
    let mut rows = Vec::new();
    if settings.format == ExportFormat::Tsv {
        writeln!(out, "relation\thead\ttail\tsentence").map_err(Failure::data)?;
    }
    for t in &triples {
        let sentence = generator.generate(t).map_err(|source| PipelineError::Generate {
            triple: t.to_string(),
            source,
        })?;
        match settings.format {
            ExportFormat::Tsv => writeln!(
                out,
                "{}\t{}\t{}\t{}",
                t.relation,
                t.head_text(),
                t.tail_text(),
                sentence.text()
            )
            .map_err(Failure::data)?,
            ExportFormat::Json => rows.push(serde_json::json!({
                "relation": t.relation,
                "head": t.head_text(),
                "tail": t.tail_text(),
                "sentence": sentence.text(),
            })),
        }
    }
    if settings.format == ExportFormat::Json {
        serde_json::to_writer_pretty(&mut out, &rows).map_err(Failure::data)?;
        writeln!(out).map_err(Failure::data)?;
    }
    out.flush().map_err(Failure::data)
}

fn tune_lambda(settings: &Settings, backends: &Backends, input: &InputArgs) -> CliResult {
    let triples = triples(read_input(input, TripleFormat::CandidateTsv, settings)?);
    let cfg = run_config(settings, LambdaSpec::Grid(settings.grid));
    let components = score_triples(&cfg, &backends.models()?, TemplateRegistry::bundled(), &triples)?
        .into_iter()
        .map(|o| o.map(|o| o.components))
        .collect::<Result<Vec<_>, _>>()?;
    let result = tune_lambda_grid(&components, &settings.grid, &cfg.gmm_options()).map_err(PipelineError::from)?;
    let mut out = output(settings)?;
    match settings.format {
        ExportFormat::Tsv => {
            writeln!(out, "lambda\taic\tselected").map_err(Failure::data)?;
            for p in &result.grid {
                let aic = p.aic.map_or_else(|| "NA".to_owned(), |a| format!("{a:.6}"));
                let selected = u8::from(p.lambda == result.best_lambda);
                writeln!(out, "{:.6}\t{aic}\t{selected}", p.lambda).map_err(Failure::data)?;
            }
        }
        ExportFormat::Json => {
            let grid: Vec<_> = result
                .grid
                .iter()
                .map(|p| serde_json::json!({"lambda": p.lambda, "aic": p.aic, "error": p.error}))
                .collect();
            let doc = serde_json::json!({
                "best_lambda": result.best_lambda,
                "best_aic": result.best_aic,
                "means": result.model.means,
                "grid": grid,
            });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(Failure::data)?;
            writeln!(out).map_err(Failure::data)?;
        }
    }
    out.flush().map_err(Failure::data)
}

fn serve_check(settings: &Settings, backends: &Backends) -> CliResult {
    if backends.masked.is_none() && backends.causal.is_none() {
        return Err(Failure::config(anyhow!("no backend configured")));
    }
    let mut out = output(settings)?;
    let probe: Vec<String> = ["a", "ferret", "is", "an", "animal"].map(str::to_owned).to_vec();
    if let Some(m) = &backends.masked {
        let query = triplemine_core::backend::MaskedQuery::from_words(&probe, &[], &[1]).map_err(Failure::backend)?;
        let lp = m.masked_probabilities(&query).map_err(Failure::backend)?[0].logprob;
        writeln!(out, "masked\t{}\tok\t{lp:.6}", m.tag()).map_err(Failure::data)?;
    }
    if let Some(c) = &backends.causal {
        let ll = c.causal_log_likelihood(&probe).map_err(Failure::backend)?;
        writeln!(out, "causal\t{}\tok\t{ll:.6}", c.tag()).map_err(Failure::data)?;
    }
    out.flush().map_err(Failure::data)
}
