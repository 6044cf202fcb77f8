//! Unsupervised valid/invalid labeling of PMI scores: a two-component
//! Gaussian mixture fitted by EM, AIC for picking the PMI weight, and F1
//! against gold labels.

mod gmm;
mod grid;
mod metrics;

use thiserror::Error;

pub use gmm::{
    aic, classify_by_mixture, fit_gmm_em, fit_single_gaussian, GaussianFit, GmmOptions, MixtureModel, MIXTURE_PARAMS,
    SINGLE_GAUSSIAN_PARAMS,
};
pub use grid::{tune_lambda_grid, GridPoint, LambdaGrid, LambdaSearchResult};
pub use metrics::{f1_score, Confusion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("need at least {needed} scores, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("all scores are identical")]
    DegenerateData,
    #[error("scores contain a non-finite value")]
    NonFinite,
    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("gold labels contain no positives")]
    NoPositives,
    #[error("invalid lambda grid: {0}")]
    BadGrid(String),
    #[error("mixture fit failed at every grid point")]
    AllFitsFailed,
}
