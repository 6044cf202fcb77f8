//! Weighted pointwise mutual information between head and tail, estimated
//! with a masked language model.
//!
//! A multi-word span's likelihood is approximated greedily: mask the whole
//! span, commit the most probable word, re-query the rest, and repeat. The
//! conditional term keeps the other span visible; the marginal term keeps it
//! masked throughout. Articles and template words are never masked.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, MaskedQuery, MaskedScorer};
use crate::generate::CandidateSentence;

#[derive(Debug, Error)]
pub enum PmiError {
    #[error("invalid span roles: {0}")]
    InvalidRoles(String),
    #[error("span not found: {0}")]
    SpanNotFound(String),
    #[error("lambda must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error("greedy round {round}: {source}")]
    Backend {
        round: usize,
        #[source]
        source: BackendError,
    },
}

impl PmiError {
    pub fn backend(&self) -> Option<&BackendError> {
        match self {
            PmiError::Backend { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Span {
    Head,
    Tail,
}

impl Span {
    pub fn other(self) -> Span {
        match self {
            Span::Head => Span::Tail,
            Span::Tail => Span::Head,
        }
    }
}

/// Which non-target words stay masked while a span is unmasked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeepMasked {
    None,
    OtherSpan,
}

/// A sentence and the positions of the maskable head and tail words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRoles {
    tokens: Vec<String>,
    head: Vec<usize>,
    tail: Vec<usize>,
}

impl SpanRoles {
    pub fn new(tokens: Vec<String>, mut head: Vec<usize>, mut tail: Vec<usize>) -> Result<Self, PmiError> {
        head.sort_unstable();
        tail.sort_unstable();
        head.dedup();
        tail.dedup();
        if head.is_empty() || tail.is_empty() {
            return Err(PmiError::InvalidRoles(
                "head and tail need at least one position".into(),
            ));
        }
        if let Some(&p) = head.iter().chain(&tail).find(|&&p| p >= tokens.len()) {
            return Err(PmiError::InvalidRoles(format!(
                "position {p} out of bounds for {} tokens",
                tokens.len()
            )));
        }
        if head.iter().any(|p| tail.binary_search(p).is_ok()) {
            return Err(PmiError::InvalidRoles("head and tail positions overlap".into()));
        }
        Ok(SpanRoles { tokens, head, tail })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn positions(&self, span: Span) -> &[usize] {
        match span {
            Span::Head => &self.head,
            Span::Tail => &self.tail,
        }
    }
}

/// Maskable positions of a rendered sentence's head and tail, taken from the
/// slot offsets recorded at render time. Inserted articles are excluded.
pub fn locate_spans(sentence: &CandidateSentence) -> Result<SpanRoles, PmiError> {
    let positions = |start: usize, variant: &crate::morpho::PhraseVariant, what: &str| {
        let end = start + variant.words.len();
        if sentence.words.get(start..end) != Some(variant.words.as_slice()) {
            return Err(PmiError::SpanNotFound(format!(
                "{what} {:?} not at offset {start} of {:?}",
                variant.words.join(" "),
                sentence.text()
            )));
        }
        Ok(variant.entity_offsets().map(|o| start + o).collect::<Vec<_>>())
    };
    let head = positions(sentence.head_start, &sentence.head, "head")?;
    let tail = positions(sentence.tail_start, &sentence.tail, "tail")?;
    SpanRoles::new(sentence.words.clone(), head, tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub position: usize,
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    /// Committed words in commit order.
    pub steps: Vec<GreedyStep>,
    pub total_loglik: f64,
}

/// Greedy log-likelihood of one span.
///
/// Each round queries every still-masked target word and commits the most
/// probable one (lowest position on ties), so `j` target words cost
/// `j (j + 1) / 2` word probabilities over `j` queries.
pub fn greedy_span_loglik(
    roles: &SpanRoles,
    target: Span,
    keep: KeepMasked,
    backend: &dyn MaskedScorer,
) -> Result<GreedyTrace, PmiError> {
    let kept: &[usize] = match keep {
        KeepMasked::None => &[],
        KeepMasked::OtherSpan => roles.positions(target.other()),
    };
    let mut remaining = roles.positions(target).to_vec();
    let mut steps = Vec::with_capacity(remaining.len());
    let mut round = 0;
    while !remaining.is_empty() {
        round += 1;
        let query = MaskedQuery::from_words(roles.tokens(), kept, &remaining)
            .map_err(|source| PmiError::Backend { round, source })?;
        let probs = backend
            .masked_probabilities(&query)
            .map_err(|source| PmiError::Backend { round, source })?;
        // `remaining` is ascending, so a strict comparison keeps the lowest position on ties
        let mut best = 0;
        for (i, p) in probs.iter().enumerate().skip(1) {
            if p.logprob > probs[best].logprob {
                best = i;
            }
        }
        let position = remaining.remove(best);
        steps.push(GreedyStep {
            position,
            token: roles.tokens()[position].clone(),
            logprob: probs[best].logprob,
        });
    }
    let total_loglik = steps.iter().map(|s| s.logprob).sum();
    Ok(GreedyTrace { steps, total_loglik })
}

/// The four greedy log-likelihoods a PMI score is built from. Recombining
/// them at a different weight needs no further model calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmiComponents {
    pub cond_tail: f64,
    pub marg_tail: f64,
    pub cond_head: f64,
    pub marg_head: f64,
}

impl PmiComponents {
    /// Average of the tail-given-head and head-given-tail weighted PMI.
    pub fn value(&self, lambda: f64) -> f64 {
        ((lambda * self.cond_tail - self.marg_tail) + (lambda * self.cond_head - self.marg_head)) / 2.0
    }

    pub fn is_finite(&self) -> bool {
        [self.cond_tail, self.marg_tail, self.cond_head, self.marg_head]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmiScore {
    #[serde(flatten)]
    pub components: PmiComponents,
    pub lambda: f64,
    pub value: f64,
}

impl PmiScore {
    pub fn new(components: PmiComponents, lambda: f64) -> Self {
        PmiScore {
            components,
            lambda,
            value: components.value(lambda),
        }
    }
}

pub fn pmi_components(roles: &SpanRoles, backend: &dyn MaskedScorer) -> Result<PmiComponents, PmiError> {
    let run = |span, keep| greedy_span_loglik(roles, span, keep, backend).map(|t| t.total_loglik);
    Ok(PmiComponents {
        cond_tail: run(Span::Tail, KeepMasked::None)?,
        marg_tail: run(Span::Tail, KeepMasked::OtherSpan)?,
        cond_head: run(Span::Head, KeepMasked::None)?,
        marg_head: run(Span::Head, KeepMasked::OtherSpan)?,
    })
}

pub fn score_pmi(roles: &SpanRoles, lambda: f64, backend: &dyn MaskedScorer) -> Result<PmiScore, PmiError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(PmiError::BadLambda(lambda));
    }
    Ok(PmiScore::new(pmi_components(roles, backend)?, lambda))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::backend::{context_key, LookupBackend, MaskedEntry, UniformBackend, MASK_TOKEN};
    use crate::generate::{generate_deterministic, DeterministicMode};
    use crate::morpho::Morphology;
    use crate::templates::TemplateRegistry;
    use crate::triple::Triple;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn masked_ctx(words: &[String], masked: &[usize]) -> String {
        let toks: Vec<String> = words
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if masked.contains(&i) {
                    MASK_TOKEN.to_owned()
                } else {
                    t.clone()
                }
            })
            .collect();
        context_key(&toks)
    }

    fn entry(ctx: &str, pos: usize, token: &str, prob: f64) -> MaskedEntry {
        MaskedEntry {
            context: Some(ctx.to_owned()),
            pos,
            token: token.to_owned(),
            prob,
        }
    }

    #[test]
    fn locate_spans_skips_articles() {
        let triple = Triple::new("ferret", "AtLocation", "pet store").unwrap();
        let s = generate_deterministic(
            &triple,
            DeterministicMode::TemplateGrammar,
            TemplateRegistry::bundled(),
            Morphology::bundled(),
        )
        .unwrap();
        assert_eq!(s.text(), "you are likely to find a ferret in a pet store");
        let roles = locate_spans(&s).unwrap();
        assert_eq!(roles.positions(Span::Head), [6]);
        assert_eq!(roles.positions(Span::Tail), [9, 10]);
    }

    #[test]
    fn locate_spans_identical_words() {
        let triple = Triple::new("cat", "RelatedTo", "cat").unwrap();
        let s = generate_deterministic(
            &triple,
            DeterministicMode::Template,
            TemplateRegistry::bundled(),
            Morphology::bundled(),
        )
        .unwrap();
        assert_eq!(s.text(), "cat is like cat");
        let roles = locate_spans(&s).unwrap();
        assert_eq!(roles.positions(Span::Head), [0]);
        assert_eq!(roles.positions(Span::Tail), [3]);
    }

    #[test]
    fn locate_spans_detects_corruption() {
        let triple = Triple::new("ferret", "AtLocation", "pet store").unwrap();
        let mut s = generate_deterministic(
            &triple,
            DeterministicMode::Template,
            TemplateRegistry::bundled(),
            Morphology::bundled(),
        )
        .unwrap();
        s.tail_start = 2;
        assert!(matches!(locate_spans(&s), Err(PmiError::SpanNotFound(_))));
    }

    #[test]
    fn roles_validation() {
        assert!(SpanRoles::new(w("a b c"), vec![0], vec![0]).is_err());
        assert!(SpanRoles::new(w("a b c"), vec![], vec![1]).is_err());
        assert!(SpanRoles::new(w("a b c"), vec![0], vec![3]).is_err());
    }

    #[test]
    fn pet_store_marginal_trace() {
        // marginal tail: head masked for the whole procedure
        let words = w("you are likely to find a ferret in the pet store");
        let roles = SpanRoles::new(words.clone(), vec![6], vec![9, 10]).unwrap();
        let round1 = masked_ctx(&words, &[6, 9, 10]);
        let round2 = masked_ctx(&words, &[6, 9]);
        let backend = LookupBackend::new(
            HashMap::new(),
            vec![
                entry(&round1, 9, "pet", 0.2),
                entry(&round1, 10, "store", 0.6),
                entry(&round2, 9, "pet", 0.5),
            ],
            None,
        )
        .unwrap();
        let trace = greedy_span_loglik(&roles, Span::Tail, KeepMasked::OtherSpan, &backend).unwrap();
        let order: Vec<&str> = trace.steps.iter().map(|s| s.token.as_str()).collect();
        assert_eq!(order, ["store", "pet"]);
        assert!((trace.total_loglik - (0.6f64.ln() + 0.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn single_word_span() {
        let words = w("dogs chase cats");
        let roles = SpanRoles::new(words.clone(), vec![0], vec![2]).unwrap();
        let ctx = masked_ctx(&words, &[2]);
        let backend = LookupBackend::new(HashMap::new(), vec![entry(&ctx, 2, "cats", 0.25)], None).unwrap();
        let trace = greedy_span_loglik(&roles, Span::Tail, KeepMasked::None, &backend).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!((trace.total_loglik - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tie_commits_lower_position() {
        let words = w("h x y");
        let roles = SpanRoles::new(words, vec![0], vec![1, 2]).unwrap();
        let backend = UniformBackend::new(7).unwrap();
        let trace = greedy_span_loglik(&roles, Span::Tail, KeepMasked::None, &backend).unwrap();
        assert_eq!(trace.steps[0].position, 1);
        assert_eq!(trace.steps[1].position, 2);
    }

    #[test]
    fn backend_errors_carry_round() {
        let words = w("h x y");
        let roles = SpanRoles::new(words.clone(), vec![0], vec![1, 2]).unwrap();
        let ctx = masked_ctx(&words, &[1, 2]);
        let backend = LookupBackend::new(
            HashMap::new(),
            vec![entry(&ctx, 1, "x", 0.9), entry(&ctx, 2, "y", 0.1)],
            None,
        )
        .unwrap();
        let err = greedy_span_loglik(&roles, Span::Tail, KeepMasked::None, &backend).unwrap_err();
        assert!(matches!(err, PmiError::Backend { round: 2, .. }));
    }

    #[test]
    fn component_arithmetic() {
        let c = PmiComponents {
            cond_tail: -1.0,
            marg_tail: -3.0,
            cond_head: -2.0,
            marg_head: -3.0,
        };
        assert_eq!(c.value(1.0), 1.5);
        assert_eq!(c.value(2.0), 0.0);
    }

    #[test]
    fn context_free_backend_scores_zero() {
        let roles = SpanRoles::new(w("a b c d e"), vec![0, 1], vec![3, 4]).unwrap();
        let backend = LookupBackend::new(
            HashMap::new(),
            (0..5)
                .map(|i| MaskedEntry {
                    context: None,
                    pos: i,
                    token: ["a", "b", "c", "d", "e"][i].into(),
                    prob: 0.1 + 0.1 * i as f64,
                })
                .collect(),
            None,
        )
        .unwrap();
        let s = score_pmi(&roles, 1.0, &backend).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!(score_pmi(&roles, -1.0, &backend).is_err());
    }
}
