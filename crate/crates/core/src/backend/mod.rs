//! Scoring-model abstraction.
//!
//! Two capabilities are needed: a causal sentence log-likelihood (used for
//! coherency ranking) and masked-position word probabilities (used for PMI).
//! Queries are word level; a backend that works on subwords expands a masked
//! word itself and reports the word's total log probability.
//!
//! Backends are selected by name through [`BackendRegistry`].

mod cache;
mod key;
mod lookup;
mod remote;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheStats, CachedModel, ScoreCache};
pub use key::{causal_cache_key, masked_cache_key};
pub use lookup::{context_key, LookupBackend, LookupFile, MaskedEntry, UniformBackend};
pub use remote::{RemoteBackend, RemoteOptions};

pub const MASK_TOKEN: &str = "[MASK]";
/// Longest accepted input, in backend tokens.
pub const DEFAULT_MAX_TOKENS: usize = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("input of {len} tokens exceeds backend limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("token {0:?} is outside the backend vocabulary")]
    UnknownToken(String),
    #[error("no lookup entry for {0}")]
    MissingEntry(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("backend rejected request: {0}")]
    Rejected(String),
    #[error("probability {0} is outside (0, 1]")]
    InvalidProbability(f64),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("score cache: {0}")]
    Cache(String),
    #[error("unknown backend kind {0:?}")]
    UnknownKind(String),
}

impl BackendError {
    /// Worth retrying against a remote service.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Unavailable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskTarget {
    pub pos: usize,
    pub token: String,
}

/// A word sequence with some positions replaced by [`MASK_TOKEN`] and the
/// true words whose probabilities are requested at those positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskedQuery {
    tokens: Vec<String>,
    targets: Vec<MaskTarget>,
}

impl MaskedQuery {
    pub fn new(tokens: Vec<String>, targets: Vec<MaskTarget>) -> Result<Self, BackendError> {
        if targets.is_empty() {
            return Err(BackendError::InvalidQuery("query has no targets".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &targets {
            match tokens.get(t.pos) {
                None => {
                    return Err(BackendError::InvalidQuery(format!(
                        "target position {} out of bounds for {} tokens",
                        t.pos,
                        tokens.len()
                    )))
                }
                Some(tok) if tok != MASK_TOKEN => {
                    return Err(BackendError::InvalidQuery(format!(
                        "target position {} is not masked",
                        t.pos
                    )))
                }
                _ => {}
            }
            if !seen.insert(t.pos) {
                return Err(BackendError::InvalidQuery(format!(
                    "duplicate target position {}",
                    t.pos
                )));
            }
        }
        Ok(MaskedQuery { tokens, targets })
    }

    /// Mask `masked` positions of `words` and ask for the original word at each of `targets`.
    pub fn from_words(words: &[String], masked: &[usize], targets: &[usize]) -> Result<Self, BackendError> {
        let mut tokens = words.to_vec();
        for &p in masked.iter().chain(targets) {
            if let Some(t) = tokens.get_mut(p) {
                *t = MASK_TOKEN.to_owned();
            }
        }
        let targets = targets
            .iter()
            .map(|&pos| {
                words
                    .get(pos)
                    .map(|w| MaskTarget { pos, token: w.clone() })
                    .ok_or_else(|| BackendError::InvalidQuery(format!("position {pos} out of bounds")))
            })
            .collect::<Result<_, _>>()?;
        MaskedQuery::new(tokens, targets)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn targets(&self) -> &[MaskTarget] {
        &self.targets
    }
}

/// Probability of one target word, carried as a natural log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProbability {
    pub position: usize,
    pub token: String,
    pub logprob: f64,
}

impl TokenProbability {
    pub fn prob(&self) -> f64 {
        self.logprob.exp()
    }
}

pub trait CausalScorer: Send + Sync {
    fn model_tag(&self) -> &str;

    /// Natural-log likelihood of the whole sentence under left-to-right factorization.
    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError>;
}

pub trait MaskedScorer: Send + Sync {
    fn model_tag(&self) -> &str;

    /// One probability per target, in target order.
    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError>;
}

/// A backend that can serve both roles.
pub trait LanguageModel: CausalScorer + MaskedScorer {
    fn tag(&self) -> &str {
        CausalScorer::model_tag(self)
    }
}

impl<T: CausalScorer + MaskedScorer> LanguageModel for T {}

pub(crate) fn check_logprob(lp: f64) -> Result<f64, BackendError> {
    if !lp.is_finite() || lp > 0.0 {
        return Err(BackendError::InvalidProbability(lp.exp()));
    }
    Ok(lp)
}

pub(crate) fn check_prob(p: f64) -> Result<f64, BackendError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BackendError::InvalidProbability(p));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Lookup,
    Uniform,
    Remote,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Lookup => "lookup",
            BackendKind::Uniform => "uniform",
            BackendKind::Remote => "remote",
        }
    }
}

/// Where a backend comes from.
///
/// Parsed from `http://host:port` (remote), `lookup:PATH` (table file) or
/// `uniform:VOCAB` (uniform distribution over a vocabulary of that size).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
}

impl BackendDescriptor {
    pub fn parse(spec: &str) -> Result<Self, BackendError> {
        let spec = spec.trim();
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(BackendDescriptor {
                kind: BackendKind::Remote,
                endpoint: Some(spec.to_owned()),
            });
        }
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let kind = match kind {
            "lookup" => BackendKind::Lookup,
            "uniform" => BackendKind::Uniform,
            "remote" => BackendKind::Remote,
            other => return Err(BackendError::UnknownKind(other.to_owned())),
        };
        if arg.is_empty() {
            return Err(BackendError::InvalidQuery(format!(
                "{} backend requires an argument",
                kind.name()
            )));
        }
        Ok(BackendDescriptor {
            kind,
            endpoint: Some(arg.to_owned()),
        })
    }
}

impl fmt::Display for BackendDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.endpoint) {
            (BackendKind::Remote, Some(e)) => f.write_str(e),
            (k, Some(e)) => write!(f, "{}:{e}", k.name()),
            (k, None) => f.write_str(k.name()),
        }
    }
}

pub type BackendFactory = fn(&BackendDescriptor, &RemoteOptions) -> Result<Arc<dyn LanguageModel>, BackendError>;

/// Backend constructors registered by kind name.
pub struct BackendRegistry {
    factories: BTreeMap<&'static str, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("lookup", |d, _| {
            let path = d.endpoint.as_deref().unwrap_or_default();
            Ok(Arc::new(LookupBackend::from_path(path.as_ref())?))
        });
        reg.register("uniform", |d, _| {
            let arg = d.endpoint.as_deref().unwrap_or_default();
            let vocab = arg
                .parse::<usize>()
                .map_err(|_| BackendError::InvalidQuery(format!("bad vocabulary size {arg:?}")))?;
            Ok(Arc::new(UniformBackend::new(vocab)?))
        });
        reg.register("remote", |d, opts| {
            let endpoint = d
                .endpoint
                .as_deref()
                .ok_or_else(|| BackendError::InvalidQuery("remote backend requires an endpoint".into()))?;
            Ok(Arc::new(RemoteBackend::connect(endpoint, opts.clone())?))
        });
        reg
    }

    pub fn register(&mut self, kind: &'static str, factory: BackendFactory) {
        self.factories.insert(kind, factory);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn open(
        &self,
        descriptor: &BackendDescriptor,
        opts: &RemoteOptions,
    ) -> Result<Arc<dyn LanguageModel>, BackendError> {
        let factory = self
            .factories
            .get(descriptor.kind.name())
            .ok_or_else(|| BackendError::UnknownKind(descriptor.kind.name().to_owned()))?;
        factory(descriptor, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn query_validation() {
        let words = w("find a ferret in the pet store");
        let q = MaskedQuery::from_words(&words, &[2], &[5, 6]).unwrap();
        assert_eq!(q.tokens()[2], MASK_TOKEN);
        assert_eq!(q.tokens()[5], MASK_TOKEN);
        assert_eq!(
            q.targets()[1],
            MaskTarget {
                pos: 6,
                token: "store".into()
            }
        );

        assert!(MaskedQuery::from_words(&words, &[], &[]).is_err());
        assert!(MaskedQuery::from_words(&words, &[], &[9]).is_err());
        let unmasked = MaskedQuery::new(
            words.clone(),
            vec![MaskTarget {
                pos: 0,
                token: "find".into(),
            }],
        );
        assert!(matches!(unmasked, Err(BackendError::InvalidQuery(_))));
    }

    #[test]
    fn descriptor_parsing() {
        let d = BackendDescriptor::parse("http://localhost:8080").unwrap();
        assert_eq!(d.kind, BackendKind::Remote);
        assert_eq!(
            BackendDescriptor::parse("uniform:10").unwrap().kind,
            BackendKind::Uniform
        );
        assert_eq!(
            BackendDescriptor::parse("lookup:/tmp/t.json")
                .unwrap()
                .endpoint
                .as_deref(),
            Some("/tmp/t.json")
        );
        assert!(matches!(
            BackendDescriptor::parse("bert:x"),
            Err(BackendError::UnknownKind(_))
        ));
        assert!(BackendDescriptor::parse("remote").is_err());
    }

    #[test]
    fn registry_opens_by_kind() {
        let reg = BackendRegistry::with_builtins();
        assert_eq!(reg.kinds().collect::<Vec<_>>(), ["lookup", "remote", "uniform"]);
        let m = reg
            .open(
                &BackendDescriptor::parse("uniform:10").unwrap(),
                &RemoteOptions::default(),
            )
            .unwrap();
        assert_eq!(m.tag(), "uniform:10");
        let empty = BackendRegistry::empty();
        assert!(empty
            .open(
                &BackendDescriptor::parse("uniform:10").unwrap(),
                &RemoteOptions::default()
            )
            .is_err());
    }
}
