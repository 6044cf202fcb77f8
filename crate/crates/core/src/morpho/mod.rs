//! Part-of-speech tagging of phrase prefixes and the three grammatical
//! transformations applied to heads and tails before templating:
//!
//! 1. a noun or adjective first word, or a verb followed by a noun or
//!    adjective, receives an article in front of the nominal part;
//! 2. an infinitive first word becomes its gerund;
//! 3. the word after a leading number is pluralized.
//!
//! Rule conditions are evaluated on the original phrase and rules are not
//! chained when enumerating variants.

mod inflect;
mod tagger;

use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inflect::{parse_exceptions, Inflector};
pub use tagger::{LexiconTagger, PosTag, PosTagger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Article {
    A,
    An,
    The,
}

impl Article {
    pub const ALL: [Article; 3] = [Article::A, Article::An, Article::The];

    pub fn as_str(self) -> &'static str {
        match self {
            Article::A => "a",
            Article::An => "an",
            Article::The => "the",
        }
    }

    /// Indefinite article chosen by the first letter of the next word.
    pub fn indefinite_for(next_word: &str) -> Article {
        match next_word.chars().next() {
            Some('a' | 'e' | 'i' | 'o' | 'u') => Article::An,
            _ => Article::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transform {
    PrependArticle(Article),
    Gerundize,
    PluralizeAfterNumber,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::PrependArticle(a) => write!(f, "article:{}", a.as_str()),
            Transform::Gerundize => f.write_str("gerund"),
            Transform::PluralizeAfterNumber => f.write_str("plural"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphoError {
    #[error("phrase is empty")]
    EmptyPhrase,
    #[error("transform {transform} does not apply to {phrase:?}")]
    NotApplicable { transform: Transform, phrase: String },
}

/// A head or tail after zero or more transformations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhraseVariant {
    pub words: Vec<String>,
    pub applied: Vec<Transform>,
    /// Index of an inserted article within `words`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_pos: Option<usize>,
}

impl PhraseVariant {
    pub fn identity(words: &[String]) -> Self {
        PhraseVariant {
            words: words.to_vec(),
            applied: Vec::new(),
            article_pos: None,
        }
    }

    /// Offsets of the words that belong to the entity itself (inserted articles excluded).
    pub fn entity_offsets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.words.len()).filter(move |&i| Some(i) != self.article_pos)
    }
}

/// Tagger plus inflector, shared read-only across workers.
#[derive(Clone)]
pub struct Morphology {
    tagger: Arc<dyn PosTagger>,
    inflector: Inflector,
}

impl fmt::Debug for Morphology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Morphology").finish_non_exhaustive()
    }
}

impl Morphology {
    pub fn new(tagger: Arc<dyn PosTagger>, inflector: Inflector) -> Self {
        Morphology { tagger, inflector }
    }

    pub fn bundled() -> &'static Morphology {
        static MORPHOLOGY: OnceLock<Morphology> = OnceLock::new();
        MORPHOLOGY.get_or_init(|| Morphology::new(Arc::new(LexiconTagger::bundled()), Inflector::bundled()))
    }

    pub fn inflector(&self) -> &Inflector {
        &self.inflector
    }

    pub fn tag_prefix(&self, phrase: &[String]) -> Result<(PosTag, Option<PosTag>), MorphoError> {
        let first = phrase.first().ok_or(MorphoError::EmptyPhrase)?;
        Ok((self.tagger.tag(first), phrase.get(1).map(|w| self.tagger.tag(w))))
    }

    /// Where rule 1 inserts its article, if it applies.
    fn article_slot(&self, tags: (PosTag, Option<PosTag>)) -> Option<usize> {
        match tags {
            (first, _) if first.is_nominal() => Some(0),
            (first, Some(second)) if first.is_verb() && second.is_nominal() => Some(1),
            _ => None,
        }
    }

    fn applicable(&self, tags: (PosTag, Option<PosTag>), t: Transform) -> bool {
        match t {
            Transform::PrependArticle(_) => self.article_slot(tags).is_some(),
            Transform::Gerundize => tags.0 == PosTag::VerbInfinitive,
            Transform::PluralizeAfterNumber => tags.0 == PosTag::Number && tags.1.is_some(),
        }
    }

    fn apply_unchecked(
        &self,
        phrase: &[String],
        tags: (PosTag, Option<PosTag>),
        t: Transform,
        variant: &mut PhraseVariant,
    ) {
        match t {
            Transform::PrependArticle(article) => {
                let slot = self.article_slot(tags).expect("checked by caller");
                // an article inserted after the verb shifts nothing before it
                variant.words.insert(slot, article.as_str().to_owned());
                variant.article_pos = Some(slot);
            }
            Transform::Gerundize => {
                let idx = variant.article_pos.map_or(0, |p| if p == 0 { 1 } else { 0 });
                variant.words[idx] = self.inflector.gerund(&phrase[0]);
            }
            Transform::PluralizeAfterNumber => {
                variant.words[1] = self.inflector.pluralize(&phrase[1]);
            }
        }
        variant.applied.push(t);
    }

    pub fn apply_transform(&self, phrase: &[String], t: Transform) -> Result<Vec<String>, MorphoError> {
        Ok(self.apply_all(phrase, &[t])?.words)
    }

    /// Apply a set of transforms, every condition judged on the original phrase.
    pub fn apply_all(&self, phrase: &[String], ts: &[Transform]) -> Result<PhraseVariant, MorphoError> {
        let tags = self.tag_prefix(phrase)?;
        let mut variant = PhraseVariant::identity(phrase);
        // gerund and plural rewrite words in place, so apply them before the article shifts indices
        let mut ordered = ts.to_vec();
        ordered.sort_by_key(|t| matches!(t, Transform::PrependArticle(_)));
        for &t in &ordered {
            if !self.applicable(tags, t) {
                return Err(MorphoError::NotApplicable {
                    transform: t,
                    phrase: phrase.join(" "),
                });
            }
            self.apply_unchecked(phrase, tags, t, &mut variant);
        }
        variant.applied.sort();
        Ok(variant)
    }

    /// Identity plus every single applicable transform (each article separately),
    /// deduplicated by surface form. At most six variants.
    pub fn enumerate_variants(&self, phrase: &[String]) -> Result<Vec<PhraseVariant>, MorphoError> {
        let tags = self.tag_prefix(phrase)?;
        let candidates = Article::ALL
            .iter()
            .map(|&a| Transform::PrependArticle(a))
            .chain([Transform::Gerundize, Transform::PluralizeAfterNumber]);
        let mut out = vec![PhraseVariant::identity(phrase)];
        let mut seen: HashSet<Vec<String>> = HashSet::from([phrase.to_vec()]);
        for t in candidates.filter(|&t| self.applicable(tags, t)) {
            let mut v = PhraseVariant::identity(phrase);
            self.apply_unchecked(phrase, tags, t, &mut v);
            if seen.insert(v.words.clone()) {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Every applicable transform at once, with the indefinite article picked
    /// by the vowel heuristic.
    pub fn deterministic_variant(&self, phrase: &[String]) -> Result<PhraseVariant, MorphoError> {
        let tags = self.tag_prefix(phrase)?;
        let mut ts = Vec::new();
        if let Some(slot) = self.article_slot(tags) {
            ts.push(Transform::PrependArticle(Article::indefinite_for(&phrase[slot])));
        }
        for t in [Transform::Gerundize, Transform::PluralizeAfterNumber] {
            if self.applicable(tags, t) {
                ts.push(t);
            }
        }
        self.apply_all(phrase, &ts)
    }
}
