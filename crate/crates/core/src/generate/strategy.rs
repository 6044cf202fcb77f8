use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;

use super::{
    enumerate_candidates, generate_concatenation, generate_deterministic, CandidateSentence, DeterministicMode,
    GenerateError,
};
use crate::backend::CausalScorer;
use crate::coherency::{select_best, LengthNormalization};
use crate::morpho::Morphology;
use crate::templates::TemplateRegistry;
use crate::triple::Triple;

/// Produces the single sentence that gets scored for a triple.
pub trait SentenceGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, triple: &Triple) -> Result<CandidateSentence, GenerateError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenerationMode {
    Concatenation,
    Template,
    TemplateGrammar,
    Coherency,
}

impl GenerationMode {
    pub const ALL: [GenerationMode; 4] = [
        GenerationMode::Concatenation,
        GenerationMode::Template,
        GenerationMode::TemplateGrammar,
        GenerationMode::Coherency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenerationMode::Concatenation => "concat",
            GenerationMode::Template => "template",
            GenerationMode::TemplateGrammar => "template+grammar",
            GenerationMode::Coherency => "coherency",
        }
    }

    pub fn needs_causal(self) -> bool {
        self == GenerationMode::Coherency
    }
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenerationMode {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GenerationMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GenerateError::UnknownMode(s.to_owned()))
    }
}

/// Shared inputs from which generators are built.
#[derive(Clone)]
pub struct GeneratorContext {
    pub templates: Arc<TemplateRegistry>,
    pub morphology: Morphology,
    pub causal: Option<Arc<dyn CausalScorer>>,
    pub normalization: LengthNormalization,
}

impl GeneratorContext {
    pub fn bundled(causal: Option<Arc<dyn CausalScorer>>) -> Self {
        GeneratorContext {
            templates: Arc::new(TemplateRegistry::bundled().clone()),
            morphology: Morphology::bundled().clone(),
            causal,
            normalization: LengthNormalization::None,
        }
    }
}

pub struct ConcatenationGenerator;

impl SentenceGenerator for ConcatenationGenerator {
    fn name(&self) -> &'static str {
        GenerationMode::Concatenation.name()
    }

    fn generate(&self, triple: &Triple) -> Result<CandidateSentence, GenerateError> {
        Ok(generate_concatenation(triple))
    }
}

pub struct TemplateGenerator {
    templates: Arc<TemplateRegistry>,
    morphology: Morphology,
}

impl SentenceGenerator for TemplateGenerator {
    fn name(&self) -> &'static str {
        GenerationMode::Template.name()
    }

    fn generate(&self, triple: &Triple) -> Result<CandidateSentence, GenerateError> {
        generate_deterministic(triple, DeterministicMode::Template, &self.templates, &self.morphology)
    }
}

pub struct TemplateGrammarGenerator {
    templates: Arc<TemplateRegistry>,
    morphology: Morphology,
}

impl SentenceGenerator for TemplateGrammarGenerator {
    fn name(&self) -> &'static str {
        GenerationMode::TemplateGrammar.name()
    }

    fn generate(&self, triple: &Triple) -> Result<CandidateSentence, GenerateError> {
        generate_deterministic(
            triple,
            DeterministicMode::TemplateGrammar,
            &self.templates,
            &self.morphology,
        )
    }
}

pub struct CoherencyGenerator {
    templates: Arc<TemplateRegistry>,
    morphology: Morphology,
    causal: Arc<dyn CausalScorer>,
    normalization: LengthNormalization,
}

impl SentenceGenerator for CoherencyGenerator {
    fn name(&self) -> &'static str {
        GenerationMode::Coherency.name()
    }

    fn generate(&self, triple: &Triple) -> Result<CandidateSentence, GenerateError> {
        let candidates = enumerate_candidates(triple, &self.templates, &self.morphology)?;
        let ranked = select_best(candidates, self.causal.as_ref(), self.normalization)?;
        Ok(ranked.best)
    }
}

pub type GeneratorFactory = fn(&GeneratorContext) -> Result<Box<dyn SentenceGenerator>, GenerateError>;

/// Generators registered by mode name.
pub struct GeneratorRegistry {
    factories: IndexMap<&'static str, GeneratorFactory>,
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl GeneratorRegistry {
    pub fn empty() -> Self {
        GeneratorRegistry {
            factories: IndexMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(GenerationMode::Concatenation.name(), |_| {
            Ok(Box::new(ConcatenationGenerator))
        });
        reg.register(GenerationMode::Template.name(), |ctx| {
            Ok(Box::new(TemplateGenerator {
                templates: ctx.templates.clone(),
                morphology: ctx.morphology.clone(),
            }))
        });
        reg.register(GenerationMode::TemplateGrammar.name(), |ctx| {
            Ok(Box::new(TemplateGrammarGenerator {
                templates: ctx.templates.clone(),
                morphology: ctx.morphology.clone(),
            }))
        });
        reg.register(GenerationMode::Coherency.name(), |ctx| {
            let causal = ctx
                .causal
                .clone()
                .ok_or_else(|| GenerateError::MissingCausal(GenerationMode::Coherency.name().into()))?;
            Ok(Box::new(CoherencyGenerator {
                templates: ctx.templates.clone(),
                morphology: ctx.morphology.clone(),
                causal,
                normalization: ctx.normalization,
            }))
        });
        reg
    }

    pub fn register(&mut self, name: &'static str, factory: GeneratorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, name: &str, ctx: &GeneratorContext) -> Result<Box<dyn SentenceGenerator>, GenerateError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| GenerateError::UnknownMode(name.to_owned()))?;
        factory(ctx)
    }
}
