//! Relation templates, loaded from data and validated at startup.
//!
//! The bundled registry keeps the source patterns character for character,
//! including the misspelled `SimlarTo` key and the `"are have similar
//! meanings"` pattern under `Synonyms`. Rendering lowercases literal words.

use std::sync::OnceLock;

use indexmap::IndexMap;
use thiserror::Error;

const BUNDLED_TEMPLATES: &str = include_str!("../data/templates.json");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template registry is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("relation {relation} template {ordinal} ({pattern:?}) must contain {{0}} and {{1}} exactly once")]
    BadSlots {
        relation: String,
        ordinal: usize,
        pattern: String,
    },
    #[error("relation {0} has no templates")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Literal(String),
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub relation: String,
    /// Position of this pattern within its relation's list.
    pub ordinal: usize,
    /// Pattern exactly as stored in the registry file.
    pub pattern: String,
    slots: Vec<Slot>,
}

impl Template {
    pub fn parse(relation: &str, ordinal: usize, pattern: &str) -> Result<Self, TemplateError> {
        let slots: Vec<Slot> = pattern
            .split_whitespace()
            .map(|w| match w {
                "{0}" => Slot::Head,
                "{1}" => Slot::Tail,
                other => Slot::Literal(other.to_lowercase()),
            })
            .collect();
        let heads = slots.iter().filter(|s| **s == Slot::Head).count();
        let tails = slots.iter().filter(|s| **s == Slot::Tail).count();
        let stray_brace = slots
            .iter()
            .any(|s| matches!(s, Slot::Literal(w) if w.contains('{') || w.contains('}')));
        if heads != 1 || tails != 1 || stray_brace {
            return Err(TemplateError::BadSlots {
                relation: relation.to_owned(),
                ordinal,
                pattern: pattern.to_owned(),
            });
        }
        Ok(Template {
            relation: relation.to_owned(),
            ordinal,
            pattern: pattern.to_owned(),
            slots,
        })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    relations: IndexMap<String, Vec<Template>>,
}

impl TemplateRegistry {
    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let raw: IndexMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut relations = IndexMap::with_capacity(raw.len());
        for (relation, patterns) in raw {
            if patterns.is_empty() {
                return Err(TemplateError::Empty(relation));
            }
            let templates = patterns
                .iter()
                .enumerate()
                .map(|(i, p)| Template::parse(&relation, i, p))
                .collect::<Result<Vec<_>, _>>()?;
            relations.insert(relation, templates);
        }
        Ok(TemplateRegistry { relations })
    }

    /// The registry shipped with the crate.
    pub fn bundled() -> &'static TemplateRegistry {
        static REGISTRY: OnceLock<TemplateRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| TemplateRegistry::from_json(BUNDLED_TEMPLATES).expect("bundled templates are valid"))
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.relations.contains_key(relation)
    }

    pub fn templates(&self, relation: &str) -> Option<&[Template]> {
        self.relations.get(relation).map(Vec::as_slice)
    }

    /// First-listed template for a relation.
    pub fn first(&self, relation: &str) -> Option<&Template> {
        self.templates(relation).and_then(|t| t.first())
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Copy keeping only the first template of each relation.
    pub fn first_only(&self) -> TemplateRegistry {
        let relations = self
            .relations
            .iter()
            .map(|(r, ts)| (r.clone(), ts[..1].to_vec()))
            .collect();
        TemplateRegistry { relations }
    }
}
