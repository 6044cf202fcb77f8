use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::key::{causal_cache_key, masked_cache_key};
use super::{BackendError, CausalScorer, LanguageModel, MaskedQuery, MaskedScorer, TokenProbability};

pub const CACHE_FILE: &str = "scores.jsonl";

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    k: String,
    v: Vec<f64>,
}

/// Append-only score store keyed by content digest.
///
/// Every record is written and flushed as soon as it is inserted, so a run
/// aborted part way keeps everything scored so far.
#[derive(Debug, Default)]
pub struct ScoreCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Vec<f64>>>,
    writer: Mutex<Option<File>>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (creating if needed) the cache stored under `dir`.
    pub fn open(dir: &Path) -> Result<Self, BackendError> {
        let io = |e: std::io::Error| BackendError::Cache(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) => {
                        entries.entry(r.k).or_insert(r.v);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring unreadable cache record: {e}", path.display(), i + 1),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(ScoreCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Vec<f64>> {
        self.entries.read().unwrap().get(key).cloned()
    }

    /// Store `values` under `key` unless already present. Returns whether a
    /// new record was written.
    pub fn insert(&self, key: &str, values: &[f64]) -> Result<bool, BackendError> {
        let mut writer = self.writer.lock().unwrap();
        {
            let mut entries = self.entries.write().unwrap();
            if entries.contains_key(key) {
                return Ok(false);
            }
            entries.insert(key.to_owned(), values.to_vec());
        }
        if let Some(file) = writer.as_mut() {
            let record = CacheRecord {
                k: key.to_owned(),
                v: values.to_vec(),
            };
            let mut line = serde_json::to_string(&record).map_err(|e| BackendError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    /// Requests forwarded to the wrapped backend.
    pub misses: u64,
}

/// Serves repeated requests from a [`ScoreCache`], forwarding the rest.
pub struct CachedModel {
    inner: Arc<dyn LanguageModel>,
    cache: Arc<ScoreCache>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CachedModel {
    pub fn new(inner: Arc<dyn LanguageModel>, cache: Arc<ScoreCache>) -> Self {
        CachedModel {
            inner,
            cache,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn cache(&self) -> &Arc<ScoreCache> {
        &self.cache
    }
}

impl CausalScorer for CachedModel {
    fn model_tag(&self) -> &str {
        CausalScorer::model_tag(self.inner.as_ref())
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        let key = causal_cache_key(sentence, CausalScorer::model_tag(self));
        if let Some(v) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v
                .first()
                .copied()
                .ok_or_else(|| BackendError::Cache(format!("empty record {key}")));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let ll = self.inner.causal_log_likelihood(sentence)?;
        self.cache.insert(&key, &[ll])?;
        Ok(ll)
    }
}

impl MaskedScorer for CachedModel {
    fn model_tag(&self) -> &str {
        MaskedScorer::model_tag(self.inner.as_ref())
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        let key = masked_cache_key(query, MaskedScorer::model_tag(self));
        if let Some(v) = self.cache.get(&key) {
            if v.len() != query.targets().len() {
                return Err(BackendError::Cache(format!("record {key} has {} values", v.len())));
            }
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(query
                .targets()
                .iter()
                .zip(v)
                .map(|(t, logprob)| TokenProbability {
                    position: t.pos,
                    token: t.token.clone(),
                    logprob,
                })
                .collect());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let probs = self.inner.masked_probabilities(query)?;
        let values: Vec<f64> = probs.iter().map(|p| p.logprob).collect();
        self.cache.insert(&key, &values)?;
        Ok(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{LookupBackend, MaskedEntry};

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn backend() -> Arc<dyn LanguageModel> {
        Arc::new(
            LookupBackend::new(
                HashMap::from([("a b c".to_owned(), -1.234_567_890_123_456_7)]),
                vec![MaskedEntry {
                    context: None,
                    pos: 1,
                    token: "b".into(),
                    prob: 0.1,
                }],
                Some(0.3),
            )
            .unwrap(),
        )
    }

    #[test]
    fn cached_and_uncached_are_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let raw = backend();
        let q = MaskedQuery::from_words(&w("a b c"), &[0], &[1, 2]).unwrap();
        let direct = raw.masked_probabilities(&q).unwrap();
        {
            let cached = CachedModel::new(raw.clone(), Arc::new(ScoreCache::open(dir.path()).unwrap()));
            assert_eq!(cached.masked_probabilities(&q).unwrap(), direct);
            assert_eq!(cached.masked_probabilities(&q).unwrap(), direct);
            assert_eq!(cached.stats(), CacheStats { hits: 1, misses: 1 });
            cached.causal_log_likelihood(&w("a b c")).unwrap();
        }
        // reload from disk
        let cached = CachedModel::new(raw.clone(), Arc::new(ScoreCache::open(dir.path()).unwrap()));
        let again = cached.masked_probabilities(&q).unwrap();
        for (a, b) in again.iter().zip(&direct) {
            assert_eq!(a.logprob.to_bits(), b.logprob.to_bits());
        }
        assert_eq!(
            cached.causal_log_likelihood(&w("a b c")).unwrap().to_bits(),
            raw.causal_log_likelihood(&w("a b c")).unwrap().to_bits()
        );
        assert_eq!(cached.stats().misses, 0);
    }

    #[test]
    fn insert_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::open(dir.path()).unwrap();
        assert!(cache.insert("k", &[-1.0]).unwrap());
        assert!(!cache.insert("k", &[-2.0]).unwrap());
        assert_eq!(cache.get("k"), Some(vec![-1.0]));
        let text = std::fs::read_to_string(dir.path().join(CACHE_FILE)).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn truncated_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(CACHE_FILE),
            "{\"k\":\"a\",\"v\":[-0.5]}\n{\"k\":\"b\",\"v\":[",
        )
        .unwrap();
        let cache = ScoreCache::open(dir.path()).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("a"), Some(vec![-0.5]));
    }

    #[test]
    fn errors_are_not_cached() {
        let cached = CachedModel::new(
            Arc::new(LookupBackend::new(HashMap::new(), vec![], None).unwrap()),
            Arc::new(ScoreCache::in_memory()),
        );
        assert!(cached.causal_log_likelihood(&w("x")).is_err());
        assert!(cached.cache().is_empty());
    }
}
