use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{fit_gmm_em, GmmOptions, MixtureModel};
use super::ClusterError;
use crate::pmi::PmiComponents;

/// Uniform grid with both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: 0.5,
            hi: 5.0,
            points: 90,
        }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.points < 2 {
            return Err(ClusterError::BadGrid(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi && self.lo >= 0.0) {
            return Err(ClusterError::BadGrid(format!("range [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.hi
                } else {
                    self.lo + i as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub aic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearchResult {
    pub best_lambda: f64,
    pub best_aic: f64,
    pub model: MixtureModel,
    pub grid: Vec<GridPoint>,
    pub scores_at_best: Vec<f64>,
}

/// Recombine precomputed components at every grid weight, fit a mixture to
/// each score set and keep the weight with the lowest AIC (smaller weight on
/// ties). Fits that fail are recorded and skipped.
pub fn tune_lambda_grid(
    components: &[PmiComponents],
    grid: &LambdaGrid,
    opts: &GmmOptions,
) -> Result<LambdaSearchResult, ClusterError> {
    grid.validate()?;
    let fits: Vec<(f64, Result<MixtureModel, ClusterError>)> = grid
        .values()
        .into_par_iter()
        .map(|lambda| {
            let scores: Vec<f64> = components.iter().map(|c| c.value(lambda)).collect();
            (lambda, fit_gmm_em(&scores, opts))
        })
        .collect();

    let mut best: Option<(f64, f64, &MixtureModel)> = None;
    for (lambda, fit) in &fits {
        match fit {
            Ok(m) => {
                let a = m.aic();
                if best.is_none_or(|(_, ba, _)| a < ba) {
                    best = Some((*lambda, a, m));
                }
            }
            Err(e) => log::warn!("lambda {lambda}: {e}"),
        }
    }
    let (best_lambda, best_aic, model) = best.ok_or(ClusterError::AllFitsFailed)?;
    let grid_points = fits
        .iter()
        .map(|(lambda, fit)| GridPoint {
            lambda: *lambda,
            aic: fit.as_ref().ok().map(MixtureModel::aic),
            error: fit.as_ref().err().map(ToString::to_string),
        })
        .collect();
    Ok(LambdaSearchResult {
        best_lambda,
        best_aic,
        model: model.clone(),
        grid: grid_points,
        scores_at_best: components.iter().map(|c| c.value(best_lambda)).collect(),
    })
}
