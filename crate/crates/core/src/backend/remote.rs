//! HTTP client for the line-delimited JSON scoring protocol:
//!
//! - `POST /causal` `{"tokens": [...]}` -> `{"loglik": f}`
//! - `POST /masked` `{"tokens": [...], "targets": [{"pos": i, "token": s}]}` -> `{"logprobs": [f, ...]}`
//! - `POST /info` -> `{"model_tag": s, "max_tokens": n}`
//!
//! Malformed requests answer 400 with `{"error": s}`; 503 means the model is
//! still loading and is retried.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{check_logprob, BackendError, CausalScorer, MaskTarget, MaskedQuery, MaskedScorer, TokenProbability};

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    /// Concurrent requests allowed per backend.
    pub max_in_flight: usize,
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            max_in_flight: 8,
            retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Serialize)]
struct CausalRequest<'a> {
    tokens: &'a [String],
}

#[derive(Debug, Deserialize)]
struct CausalResponse {
    loglik: f64,
}

#[derive(Debug, Serialize)]
struct MaskedRequest<'a> {
    tokens: &'a [String],
    targets: &'a [MaskTarget],
}

#[derive(Debug, Deserialize)]
struct MaskedResponse {
    logprobs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InfoResponse {
    pub model_tag: String,
    pub max_tokens: usize,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Permits {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    base: String,
    tag: String,
    max_tokens: usize,
    permits: Permits,
    opts: RemoteOptions,
}

impl RemoteBackend {
    /// Connect and read the service's model tag and length limit from `/info`.
    pub fn connect(endpoint: &str, opts: RemoteOptions) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(opts.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let mut backend = RemoteBackend {
            client,
            base: endpoint.trim_end_matches('/').to_owned(),
            tag: String::new(),
            max_tokens: 0,
            permits: Permits::new(opts.max_in_flight),
            opts,
        };
        let info = backend.info()?;
        backend.tag = info.model_tag;
        backend.max_tokens = info.max_tokens;
        Ok(backend)
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn info(&self) -> Result<InfoResponse, BackendError> {
        self.post("info", &serde_json::json!({}))
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, route: &str, body: &B) -> Result<R, BackendError> {
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.permits.acquire();
                self.post_once(route, body)
            };
            match result {
                Err(e) if e.is_transient() && attempt < self.opts.retries => {
                    let delay = self.opts.backoff * 2u32.pow(attempt);
                    log::debug!("{route}: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, route: &str, body: &B) -> Result<R, BackendError> {
        let url = format!("{}/{route}", self.base);
        let resp = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        match status.as_u16() {
            200 => serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(format!("{url}: {e}"))),
            400 => {
                let msg = serde_json::from_str::<ErrorBody>(&text)
                    .map(|b| b.error)
                    .unwrap_or(text);
                if msg.to_lowercase().contains("unknown token") {
                    Err(BackendError::UnknownToken(msg))
                } else {
                    Err(BackendError::Rejected(msg))
                }
            }
            503 => Err(BackendError::Unavailable(format!("{url}: model not loaded"))),
            code => Err(BackendError::Transport(format!("{url}: HTTP {code}"))),
        }
    }

    fn check_len(&self, len: usize) -> Result<(), BackendError> {
        if self.max_tokens > 0 && len > self.max_tokens {
            return Err(BackendError::TooLong {
                len,
                max: self.max_tokens,
            });
        }
        Ok(())
    }
}

impl CausalScorer for RemoteBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        if sentence.is_empty() {
            return Err(BackendError::InvalidQuery("empty sentence".into()));
        }
        self.check_len(sentence.len())?;
        let resp: CausalResponse = self.post("causal", &CausalRequest { tokens: sentence })?;
        check_logprob(resp.loglik)
    }
}

impl MaskedScorer for RemoteBackend {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        self.check_len(query.tokens().len())?;
        let resp: MaskedResponse = self.post(
            "masked",
            &MaskedRequest {
                tokens: query.tokens(),
                targets: query.targets(),
            },
        )?;
        if resp.logprobs.len() != query.targets().len() {
            return Err(BackendError::BadResponse(format!(
                "expected {} logprobs, got {}",
                query.targets().len(),
                resp.logprobs.len()
            )));
        }
        query
            .targets()
            .iter()
            .zip(resp.logprobs)
            .map(|(t, lp)| {
                Ok(TokenProbability {
                    position: t.pos,
                    token: t.token.clone(),
                    logprob: check_logprob(lp)?,
                })
            })
            .collect()
    }
}
