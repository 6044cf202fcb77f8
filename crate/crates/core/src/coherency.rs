//! Choosing the most natural candidate sentence with a left-to-right model.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CausalScorer};
use crate::generate::CandidateSentence;

#[derive(Debug, Error)]
pub enum CoherencyError {
    #[error("no candidate sentences to rank")]
    Empty,
    #[error("scoring {candidate:?}: {source}")]
    Backend {
        candidate: String,
        #[source]
        source: BackendError,
    },
}

/// How candidate log-likelihoods are compared.
///
/// `None` ranks by the raw sentence log-likelihood, which favours shorter
/// sentences. `PerWord` divides by word count and exists for sensitivity runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthNormalization {
    #[default]
    None,
    PerWord,
}

impl LengthNormalization {
    fn apply(self, loglik: f64, words: usize) -> f64 {
        match self {
            LengthNormalization::None => loglik,
            LengthNormalization::PerWord => loglik / words.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankedCandidates {
    pub best: CandidateSentence,
    /// All candidates, best first.
    pub all: Vec<CandidateSentence>,
}

fn tie_order(a: &CandidateSentence, b: &CandidateSentence) -> Ordering {
    let ordinal = |c: &CandidateSentence| c.template.as_ref().map_or(0, |t| t.ordinal);
    ordinal(a)
        .cmp(&ordinal(b))
        .then_with(|| a.transform_count().cmp(&b.transform_count()))
        .then_with(|| a.words.cmp(&b.words))
}

/// Score every candidate once and sort by descending log-likelihood.
///
/// Ties go to the lower template ordinal, then fewer transformations, then
/// lexicographic text.
pub fn select_best(
    candidates: Vec<CandidateSentence>,
    scorer: &dyn CausalScorer,
    normalization: LengthNormalization,
) -> Result<RankedCandidates, CoherencyError> {
    if candidates.is_empty() {
        return Err(CoherencyError::Empty);
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for mut c in candidates {
        let ll = scorer
            .causal_log_likelihood(&c.words)
            .map_err(|source| CoherencyError::Backend {
                candidate: c.text(),
                source,
            })?;
        c.coherency_loglik = Some(ll);
        scored.push((normalization.apply(ll, c.words.len()), c));
    }
    scored.sort_by(|(sa, a), (sb, b)| sb.total_cmp(sa).then_with(|| tie_order(a, b)));
    let all: Vec<CandidateSentence> = scored.into_iter().map(|(_, c)| c).collect();
    Ok(RankedCandidates {
        best: all[0].clone(),
        all,
    })
}
