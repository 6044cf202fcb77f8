use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_prob, BackendError, CausalScorer, MaskedQuery, MaskedScorer, TokenProbability, DEFAULT_MAX_TOKENS};

/// Key under which a masked context is stored: the query tokens joined by spaces.
pub fn context_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedEntry {
    /// Masked context (see [`context_key`]); `None` matches any context.
    #[serde(default)]
    pub context: Option<String>,
    pub pos: usize,
    pub token: String,
    pub prob: f64,
}

/// On-disk form of a lookup backend.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LookupFile {
    #[serde(default)]
    pub model_tag: Option<String>,
    #[serde(default)]
    pub causal: HashMap<String, f64>,
    #[serde(default)]
    pub masked: Vec<MaskedEntry>,
    #[serde(default)]
    pub default: Option<f64>,
}

type MaskedKey = (Option<String>, usize, String);

/// Answers exactly from tables. Masked lookups try the exact context first,
/// then a context-free entry, then the default probability.
#[derive(Debug, Clone)]
pub struct LookupBackend {
    tag: String,
    causal: HashMap<String, f64>,
    masked: HashMap<MaskedKey, f64>,
    default: Option<f64>,
    max_tokens: usize,
}

impl LookupBackend {
    pub fn new(
        causal: HashMap<String, f64>,
        masked: Vec<MaskedEntry>,
        default: Option<f64>,
    ) -> Result<Self, BackendError> {
        if let Some(p) = default {
            check_prob(p)?;
        }
        for (sentence, ll) in &causal {
            if !ll.is_finite() || *ll > 0.0 {
                return Err(BackendError::InvalidQuery(format!(
                    "log-likelihood {ll} for {sentence:?} must be finite and non-positive"
                )));
            }
        }
        let mut table = HashMap::with_capacity(masked.len());
        for e in masked {
            let lp = check_prob(e.prob)?.ln();
            table.insert((e.context, e.pos, e.token), lp);
        }
        Ok(LookupBackend {
            tag: "lookup".to_owned(),
            causal,
            masked: table,
            default,
            max_tokens: DEFAULT_MAX_TOKENS,
        })
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn from_file(file: LookupFile) -> Result<Self, BackendError> {
        let tag = file.model_tag.clone();
        let backend = LookupBackend::new(file.causal, file.masked, file.default)?;
        Ok(match tag {
            Some(t) => backend.with_tag(t),
            None => backend,
        })
    }

    /// Load a JSON [`LookupFile`]. Without an explicit tag the model tag is
    /// derived from the file content, so edited tables never share cache entries.
    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let bytes = std::fs::read(path).map_err(|e| BackendError::Transport(format!("{}: {e}", path.display())))?;
        let file: LookupFile = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::BadResponse(format!("{}: {e}", path.display())))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let explicit = file.model_tag.is_some();
        let backend = Self::from_file(file)?;
        Ok(if explicit {
            backend
        } else {
            backend.with_tag(format!("lookup:{}", &digest[..16]))
        })
    }

    fn check_len(&self, len: usize) -> Result<(), BackendError> {
        if len > self.max_tokens {
            return Err(BackendError::TooLong {
                len,
                max: self.max_tokens,
            });
        }
        Ok(())
    }
}

impl CausalScorer for LookupBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        if sentence.is_empty() {
            return Err(BackendError::InvalidQuery("empty sentence".into()));
        }
        self.check_len(sentence.len())?;
        let key = sentence.join(" ");
        match (self.causal.get(&key), self.default) {
            (Some(&ll), _) => Ok(ll),
            (None, Some(p)) => Ok(sentence.len() as f64 * p.ln()),
            (None, None) => Err(BackendError::MissingEntry(format!("sentence {key:?}"))),
        }
    }
}

impl MaskedScorer for LookupBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        self.check_len(query.tokens().len())?;
        let ctx = context_key(query.tokens());
        query
            .targets()
            .iter()
            .map(|t| {
                let exact = (Some(ctx.clone()), t.pos, t.token.clone());
                let free = (None, t.pos, t.token.clone());
                let logprob = self
                    .masked
                    .get(&exact)
                    .or_else(|| self.masked.get(&free))
                    .copied()
                    .or_else(|| self.default.map(f64::ln))
                    .ok_or_else(|| BackendError::MissingEntry(format!("{:?} at {} in {ctx:?}", t.token, t.pos)))?;
                Ok(TokenProbability {
                    position: t.pos,
                    token: t.token.clone(),
                    logprob,
                })
            })
            .collect()
    }
}

/// Every word has probability `1 / vocab_size` wherever it appears.
#[derive(Debug, Clone)]
pub struct UniformBackend {
    vocab_size: usize,
    tag: String,
    max_tokens: usize,
}

impl UniformBackend {
    pub fn new(vocab_size: usize) -> Result<Self, BackendError> {
        if vocab_size == 0 {
            return Err(BackendError::InvalidQuery("vocabulary size must be positive".into()));
        }
        Ok(UniformBackend {
            vocab_size,
            tag: format!("uniform:{vocab_size}"),
            max_tokens: DEFAULT_MAX_TOKENS,
        })
    }

    fn logprob(&self) -> f64 {
        -(self.vocab_size as f64).ln()
    }
}

impl CausalScorer for UniformBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        if sentence.is_empty() {
            return Err(BackendError::InvalidQuery("empty sentence".into()));
        }
        if sentence.len() > self.max_tokens {
            return Err(BackendError::TooLong {
                len: sentence.len(),
                max: self.max_tokens,
            });
        }
        Ok(sentence.len() as f64 * self.logprob())
    }
}

impl MaskedScorer for UniformBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        if query.tokens().len() > self.max_tokens {
            return Err(BackendError::TooLong {
                len: query.tokens().len(),
                max: self.max_tokens,
            });
        }
        Ok(query
            .targets()
            .iter()
            .map(|t| TokenProbability {
                position: t.pos,
                token: t.token.clone(),
                logprob: self.logprob(),
            })
            .collect())
    }
}
