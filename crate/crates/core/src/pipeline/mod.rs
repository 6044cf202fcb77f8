//! End-to-end drivers: scoring, classification of labeled triples,
//! ranking of mined candidates and report export.
//!
//! Per-triple work fans out over a bounded thread pool; clustering, ranking
//! and export run on the calling thread in input order.

mod config;
mod negatives;
mod report;
mod task;

use std::sync::Arc;

use thiserror::Error;

use crate::backend::{BackendError, CausalScorer, MaskedScorer};
use crate::cluster::{ClusterError, GmmOptions, LambdaGrid};
use crate::coherency::LengthNormalization;
use crate::generate::{GenerateError, GenerationMode};
use crate::pmi::PmiError;

pub use config::{parse_config_file, ConfigError};
pub use negatives::{sample_negatives, with_negatives};
pub use report::{export_report, ExportFormat, Report, ScoredTriple, TaskKind};
pub use task::{run_score, run_task1, run_task2, score_triples, MineOptions, TripleOutcome};

/// PMI weight used for mining when none is given.
pub const DEFAULT_MINING_LAMBDA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Fixed(f64),
    /// Pick by mixture AIC; classification only.
    Grid(LambdaGrid),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: GenerationMode,
    pub lambda: LambdaSpec,
    pub seed: u64,
    /// Worker threads for per-triple scoring.
    pub concurrency: usize,
    pub normalization: LengthNormalization,
    pub gmm_restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: GenerationMode::Coherency,
            lambda: LambdaSpec::Grid(LambdaGrid::default()),
            seed: 0,
            concurrency: 4,
            normalization: LengthNormalization::None,
            gmm_restarts: 0,
        }
    }
}

impl RunConfig {
    pub fn gmm_options(&self) -> GmmOptions {
        GmmOptions {
            restarts: self.gmm_restarts,
            ..GmmOptions::seeded(self.seed)
        }
    }
}

/// The scoring models a run talks to.
#[derive(Clone)]
pub struct Models {
    pub masked: Arc<dyn MaskedScorer>,
    pub causal: Option<Arc<dyn CausalScorer>>,
}

impl Models {
    pub fn masked_tag(&self) -> String {
        self.masked.model_tag().to_owned()
    }

    pub fn causal_tag(&self) -> Option<String> {
        self.causal.as_ref().map(|c| c.model_tag().to_owned())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("negative sampling: {0}")]
    Sampling(String),
    #[error("generating sentence for {triple}: {source}")]
    Generate {
        triple: String,
        #[source]
        source: GenerateError,
    },
    #[error("scoring {triple}: {source}")]
    Pmi {
        triple: String,
        #[source]
        source: PmiError,
    },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn backend(&self) -> Option<&BackendError> {
        match self {
            PipelineError::Generate { source, .. } => source.backend(),
            PipelineError::Pmi { source, .. } => source.backend(),
            _ => None,
        }
    }

    /// Process exit code: 1 data, 2 backend or transport, 3 configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 3,
            PipelineError::Generate {
                source: GenerateError::MissingCausal(_) | GenerateError::UnknownMode(_),
                ..
            } => 3,
            e if e.backend().is_some() => 2,
            _ => 1,
        }
    }
}
