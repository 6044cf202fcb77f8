use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{Report, ScoredTriple, TaskKind};
use super::{LambdaSpec, Models, PipelineError, RunConfig};
use crate::backend::BackendError;
use crate::cluster::{classify_by_mixture, f1_score, fit_gmm_em, tune_lambda_grid};
use crate::generate::{CandidateSentence, GeneratorContext, GeneratorRegistry, SentenceGenerator};
use crate::pmi::{locate_spans, pmi_components, PmiComponents, PmiScore};
use crate::templates::TemplateRegistry;
use crate::triple::{LabeledTriple, Triple};

/// Sentence and PMI components for one triple.
#[derive(Debug, Clone)]
pub struct TripleOutcome {
    pub sentence: CandidateSentence,
    pub components: PmiComponents,
}

fn build_generator(
    config: &RunConfig,
    models: &Models,
    templates: &TemplateRegistry,
) -> Result<Box<dyn SentenceGenerator>, PipelineError> {
    if config.mode.needs_causal() && models.causal.is_none() {
        return Err(PipelineError::Config(format!(
            "mode {} requires a causal backend",
            config.mode
        )));
    }
    let ctx = GeneratorContext {
        templates: std::sync::Arc::new(templates.clone()),
        normalization: config.normalization,
        ..GeneratorContext::bundled(models.causal.clone())
    };
    GeneratorRegistry::with_builtins()
        .build(config.mode.name(), &ctx)
        .map_err(|e| PipelineError::Config(e.to_string()))
}

fn score_one(
    generator: &dyn SentenceGenerator,
    models: &Models,
    triple: &Triple,
) -> Result<TripleOutcome, PipelineError> {
    let sentence = generator.generate(triple).map_err(|source| PipelineError::Generate {
        triple: triple.to_string(),
        source,
    })?;
    let pmi_err = |source| PipelineError::Pmi {
        triple: triple.to_string(),
        source,
    };
    let roles = locate_spans(&sentence).map_err(pmi_err)?;
    let components = pmi_components(&roles, models.masked.as_ref()).map_err(pmi_err)?;
    Ok(TripleOutcome { sentence, components })
}

/// Generate and score every triple on a pool of `config.concurrency`
/// workers. Results come back in input order.
pub fn score_triples(
    config: &RunConfig,
    models: &Models,
    templates: &TemplateRegistry,
    triples: &[Triple],
) -> Result<Vec<Result<TripleOutcome, PipelineError>>, PipelineError> {
    let generator = build_generator(config, models, templates)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(pool.install(|| {
        triples
            .par_iter()
            .map(|t| score_one(generator.as_ref(), models, t))
            .collect()
    }))
}

fn fixed_lambda(config: &RunConfig) -> Result<f64, PipelineError> {
    match config.lambda {
        LambdaSpec::Fixed(l) if l.is_finite() && l >= 0.0 => Ok(l),
        LambdaSpec::Fixed(l) => Err(PipelineError::Config(format!("lambda must be non-negative, got {l}"))),
        LambdaSpec::Grid(_) => Err(PipelineError::Config(
            "a lambda grid is only valid for classification".into(),
        )),
    }
}

fn row(triple: &Triple, outcome: TripleOutcome, lambda: f64) -> ScoredTriple {
    ScoredTriple {
        triple: triple.clone(),
        sentence: outcome.sentence,
        pmi: PmiScore::new(outcome.components, lambda),
        label: None,
        predicted: None,
        rank: None,
    }
}

fn new_report(task: TaskKind, config: &RunConfig, models: &Models, lambda: f64) -> Report {
    Report {
        task,
        mode: config.mode.name().to_owned(),
        masked_model: models.masked_tag(),
        causal_model: if config.mode.needs_causal() {
            models.causal_tag()
        } else {
            None
        },
        lambda,
        f1: None,
        lambda_grid: None,
        rows: Vec::new(),
    }
}

/// Score triples at a fixed weight, keeping input order. Any failure aborts.
pub fn run_score(
    config: &RunConfig,
    models: &Models,
    templates: &TemplateRegistry,
    triples: &[Triple],
) -> Result<Report, PipelineError> {
    let lambda = fixed_lambda(config)?;
    let outcomes = score_triples(config, models, templates, triples)?;
    let mut report = new_report(TaskKind::Score, config, models, lambda);
    for (t, o) in triples.iter().zip(outcomes) {
        report.rows.push(row(t, o?, lambda));
    }
    Ok(report)
}

/// Classify labeled triples: score, choose the weight (fixed or by AIC over
/// the grid), cluster into two groups and report F1 of the higher-mean group.
pub fn run_task1(
    config: &RunConfig,
    models: &Models,
    templates: &TemplateRegistry,
    data: &[LabeledTriple],
) -> Result<Report, PipelineError> {
    if !data.iter().any(|d| d.label) || data.iter().all(|d| d.label) {
        return Err(PipelineError::Data(
            "classification needs both valid and invalid triples".into(),
        ));
    }
    if let LambdaSpec::Fixed(_) = config.lambda {
        fixed_lambda(config)?;
    }
    let triples: Vec<Triple> = data.iter().map(|d| d.triple.clone()).collect();
    let outcomes = score_triples(config, models, templates, &triples)?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let components: Vec<PmiComponents> = outcomes.iter().map(|o| o.components).collect();

    let opts = config.gmm_options();
    let (lambda, model, grid) = match config.lambda {
        LambdaSpec::Grid(grid) => {
            let search = tune_lambda_grid(&components, &grid, &opts)?;
            (search.best_lambda, search.model, Some(search.grid))
        }
        LambdaSpec::Fixed(l) => {
            let scores: Vec<f64> = components.iter().map(|c| c.value(l)).collect();
            (l, fit_gmm_em(&scores, &opts)?, None)
        }
    };
    let scores: Vec<f64> = components.iter().map(|c| c.value(lambda)).collect();
    let predicted = classify_by_mixture(&scores, &model);
    let truth: Vec<bool> = data.iter().map(|d| d.label).collect();

    let mut report = new_report(TaskKind::Classify, config, models, lambda);
    report.f1 = Some(f1_score(&predicted, &truth)?);
    report.lambda_grid = grid;
    for ((d, o), p) in data.iter().zip(outcomes).zip(predicted) {
        let mut r = row(&d.triple, o, lambda);
        r.label = Some(d.label);
        r.predicted = Some(p);
        report.rows.push(r);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MineOptions {
    pub top_k: usize,
    /// Score only this many randomly chosen candidates per relation.
    pub per_relation: Option<usize>,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            top_k: 100,
            per_relation: None,
        }
    }
}

fn stratified_sample(candidates: &[Triple], per_relation: usize, seed: u64) -> Vec<usize> {
    let mut by_relation: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in candidates.iter().enumerate() {
        by_relation.entry(&t.relation).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = by_relation
        .values()
        .flat_map(|idx| idx.choose_multiple(&mut rng, per_relation).copied().collect::<Vec<_>>())
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Rank mined candidates by PMI at a fixed weight and keep the top `k`.
/// Triples that fail to score are logged and left out; a transport
/// failure aborts the run.
pub fn run_task2(
    config: &RunConfig,
    models: &Models,
    templates: &TemplateRegistry,
    candidates: &[Triple],
    opts: MineOptions,
) -> Result<Report, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Data("no candidate triples".into()));
    }
    let lambda = fixed_lambda(config)?;
    let pool: Vec<Triple> = match opts.per_relation {
        Some(n) => stratified_sample(candidates, n, config.seed)
            .into_iter()
            .map(|i| candidates[i].clone())
            .collect(),
        None => candidates.to_vec(),
    };
    let outcomes = score_triples(config, models, templates, &pool)?;
    let mut rows = Vec::with_capacity(pool.len());
    for (t, o) in pool.iter().zip(outcomes) {
        match o {
            Ok(o) => rows.push(row(t, o, lambda)),
            Err(e) if e.backend().is_some_and(BackendError::is_transient) => return Err(e),
            Err(e) => log::warn!("excluded from ranking: {e}"),
        }
    }
    // stable: equal scores keep input order
    rows.sort_by(|a, b| b.pmi.value.total_cmp(&a.pmi.value));
    rows.truncate(opts.top_k);
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = Some(i + 1);
    }
    let mut report = new_report(TaskKind::Mine, config, models, lambda);
    report.rows = rows;
    Ok(report)
}
