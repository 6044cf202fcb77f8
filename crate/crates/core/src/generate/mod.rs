//! Turning triples into sentences.
//!
//! Four strategies are available through [`GeneratorRegistry`]: plain
//! concatenation, the first template, the first template with every
//! grammatical transformation, and coherency ranking over all templates and
//! transformation combinations.

mod strategy;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::coherency::CoherencyError;
use crate::morpho::{MorphoError, Morphology, PhraseVariant};
use crate::templates::{Slot, Template, TemplateRegistry};
use crate::text::split_camel_case;
use crate::triple::Triple;

pub use strategy::{
    CoherencyGenerator, ConcatenationGenerator, GenerationMode, GeneratorContext, GeneratorFactory, GeneratorRegistry,
    SentenceGenerator, TemplateGenerator, TemplateGrammarGenerator,
};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("relation {0:?} has no templates")]
    NoTemplates(String),
    #[error(transparent)]
    Morpho(#[from] MorphoError),
    #[error(transparent)]
    Coherency(#[from] CoherencyError),
    #[error("unknown generation mode {0:?}")]
    UnknownMode(String),
    #[error("generation mode {0:?} needs a causal scoring backend")]
    MissingCausal(String),
}

impl GenerateError {
    pub fn backend(&self) -> Option<&BackendError> {
        match self {
            GenerateError::Coherency(CoherencyError::Backend { source, .. }) => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateRef {
    pub relation: String,
    pub ordinal: usize,
}

/// A rendered sentence with enough provenance to find the head and tail again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSentence {
    pub words: Vec<String>,
    pub template: Option<TemplateRef>,
    pub head: PhraseVariant,
    pub tail: PhraseVariant,
    /// Index in `words` where the head variant starts.
    pub head_start: usize,
    pub tail_start: usize,
    pub coherency_loglik: Option<f64>,
}

impl CandidateSentence {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }

    pub fn transform_count(&self) -> usize {
        self.head.applied.len() + self.tail.applied.len()
    }
}

/// Substitute head and tail into a template's slots.
pub fn render(template: &Template, head: &PhraseVariant, tail: &PhraseVariant) -> CandidateSentence {
    let mut words = Vec::new();
    let (mut head_start, mut tail_start) = (0, 0);
    for slot in template.slots() {
        match slot {
            Slot::Literal(w) => words.push(w.clone()),
            Slot::Head => {
                head_start = words.len();
                words.extend(head.words.iter().cloned());
            }
            Slot::Tail => {
                tail_start = words.len();
                words.extend(tail.words.iter().cloned());
            }
        }
    }
    CandidateSentence {
        words,
        template: Some(TemplateRef {
            relation: template.relation.clone(),
            ordinal: template.ordinal,
        }),
        head: head.clone(),
        tail: tail.clone(),
        head_start,
        tail_start,
        coherency_loglik: None,
    }
}

/// `head`, the relation split into lowercase words, then `tail`.
pub fn generate_concatenation(triple: &Triple) -> CandidateSentence {
    let relation = split_camel_case(&triple.relation);
    let mut words = triple.head.clone();
    words.extend(relation);
    let tail_start = words.len();
    words.extend(triple.tail.iter().cloned());
    CandidateSentence {
        words,
        template: None,
        head: PhraseVariant::identity(&triple.head),
        tail: PhraseVariant::identity(&triple.tail),
        head_start: 0,
        tail_start,
        coherency_loglik: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterministicMode {
    Template,
    TemplateGrammar,
}

/// Render with the first template for the relation, optionally applying
/// every grammatical transformation with the indefinite-article heuristic.
pub fn generate_deterministic(
    triple: &Triple,
    mode: DeterministicMode,
    templates: &TemplateRegistry,
    morphology: &Morphology,
) -> Result<CandidateSentence, GenerateError> {
    let template = templates
        .first(&triple.relation)
        .ok_or_else(|| GenerateError::NoTemplates(triple.relation.clone()))?;
    let (head, tail) = match mode {
        DeterministicMode::Template => (
            PhraseVariant::identity(&triple.head),
            PhraseVariant::identity(&triple.tail),
        ),
        DeterministicMode::TemplateGrammar => (
            morphology.deterministic_variant(&triple.head)?,
            morphology.deterministic_variant(&triple.tail)?,
        ),
    };
    Ok(render(template, &head, &tail))
}

/// Every template crossed with every head and tail variant, first occurrence
/// of each surface text kept.
pub fn enumerate_candidates(
    triple: &Triple,
    templates: &TemplateRegistry,
    morphology: &Morphology,
) -> Result<Vec<CandidateSentence>, GenerateError> {
    let list = templates
        .templates(&triple.relation)
        .ok_or_else(|| GenerateError::NoTemplates(triple.relation.clone()))?;
    let heads = morphology.enumerate_variants(&triple.head)?;
    let tails = morphology.enumerate_variants(&triple.tail)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for template in list {
        for h in &heads {
            for t in &tails {
                let c = render(template, h, t);
                if seen.insert(c.words.clone()) {
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}
