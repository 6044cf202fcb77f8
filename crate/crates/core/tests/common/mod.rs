#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::Value;
use triplemine_core::backend::{BackendError, CausalScorer, MaskedQuery, MaskedScorer, TokenProbability};

pub type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server: one request per connection, JSON bodies only.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<(String, Value)>>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&str, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let log = Arc::clone(&requests);
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let handler = Arc::clone(&handler);
                let log = Arc::clone(&log);
                std::thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        MockServer { url, requests }
    }

    pub fn count(&self, route: &str) -> usize {
        self.requests.lock().unwrap().iter().filter(|(r, _)| r == route).count()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<(String, Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let path = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("/")
        .trim_start_matches('/')
        .to_owned();
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    let json: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    log.lock().unwrap().push((path.clone(), json.clone()));
    let (code, text) = handler(&path, &json);
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
}

/// Masked scorer defined by a closure over (context tokens, position, true word).
pub struct FnScorer<F> {
    pub tag: String,
    pub f: F,
    pub calls: AtomicUsize,
}

impl<F> FnScorer<F>
where
    F: Fn(&[String], usize, &str) -> f64 + Send + Sync,
{
    pub fn new(tag: &str, f: F) -> Self {
        FnScorer {
            tag: tag.to_owned(),
            f,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> MaskedScorer for FnScorer<F>
where
    F: Fn(&[String], usize, &str) -> f64 + Send + Sync,
{
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(query
            .targets()
            .iter()
            .map(|t| TokenProbability {
                position: t.pos,
                token: t.token.clone(),
                logprob: (self.f)(query.tokens(), t.pos, &t.token).ln(),
            })
            .collect())
    }
}

impl<F> CausalScorer for FnScorer<F>
where
    F: Fn(&[String], usize, &str) -> f64 + Send + Sync,
{
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(-(sentence.len() as f64))
    }
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// Pseudo-random probability in [0.01, 0.99] determined by (seed, context, position, word).
pub fn hashed_prob(seed: u64, tokens: &[String], pos: usize, word: &str) -> f64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (seed, tokens, pos, word).hash(&mut h);
    0.01 + 0.98 * ((h.finish() >> 11) as f64 / (1u64 << 53) as f64)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Greedy span log-likelihood by exhaustive search: try every unmasking
/// order and keep the one where each commit beats all alternatives of its
/// round (a lower position wins an exact tie). Returns the commit order
/// and the summed log-probability.
pub fn brute_force_greedy(
    words: &[String],
    target: &[usize],
    kept_masked: &[usize],
    prob: &dyn Fn(&[String], usize, &str) -> f64,
) -> (Vec<usize>, f64) {
    let mut valid = Vec::new();
    for order in permutations(target) {
        let mut total = 0.0;
        let mut ok = true;
        for k in 0..order.len() {
            let open = &order[k..];
            let ctx: Vec<String> = words
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    if open.contains(&i) || kept_masked.contains(&i) {
                        "[MASK]".to_owned()
                    } else {
                        w.clone()
                    }
                })
                .collect();
            let p = |i: usize| prob(&ctx, i, &words[i]);
            let chosen = order[k];
            let pc = p(chosen);
            if open[1..].iter().any(|&o| p(o) > pc || (p(o) == pc && o < chosen)) {
                ok = false;
                break;
            }
            total += pc.ln();
        }
        if ok {
            valid.push((order, total));
        }
    }
    assert_eq!(valid.len(), 1, "exactly one order is greedy-consistent");
    valid.pop().unwrap()
}

/// Count-based masked model over a fixed set of sentences: the probability
/// of a word is its smoothed frequency at that position among corpus
/// sentences that agree with every unmasked token of the query.
pub struct CorpusLm {
    sentences: Vec<Vec<String>>,
    vocab: usize,
    pub calls: AtomicUsize,
}

impl CorpusLm {
    const SMOOTHING: f64 = 0.01;

    pub fn new(sentences: Vec<Vec<String>>) -> Self {
        let vocab = sentences
            .iter()
            .flatten()
            .collect::<std::collections::HashSet<_>>()
            .len()
            + 1;
        CorpusLm {
            sentences,
            vocab,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn prob(&self, ctx: &[String], pos: usize, word: &str) -> f64 {
        let consistent: Vec<&Vec<String>> = self
            .sentences
            .iter()
            .filter(|s| s.len() == ctx.len() && s.iter().zip(ctx).all(|(a, b)| b == "[MASK]" || a == b))
            .collect();
        let hits = consistent.iter().filter(|s| s[pos] == word).count();
        (hits as f64 + Self::SMOOTHING) / (consistent.len() as f64 + Self::SMOOTHING * self.vocab as f64)
    }
}

impl MaskedScorer for CorpusLm {
    fn model_tag(&self) -> &str {
        "corpus-lm"
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(query
            .targets()
            .iter()
            .map(|t| TokenProbability {
                position: t.pos,
                token: t.token.clone(),
                logprob: self.prob(query.tokens(), t.pos, &t.token).ln(),
            })
            .collect())
    }
}

/// `n` valid facts with single-word, pairwise distinct heads and tails.
pub fn synthetic_facts(n: usize) -> Vec<triplemine_core::triple::Triple> {
    const RELATIONS: [&str; 5] = ["AtLocation", "IsA", "UsedFor", "CapableOf", "HasA"];
    (0..n)
        .map(|i| {
            triplemine_core::triple::Triple::new(
                &format!("head{i}"),
                RELATIONS[i % RELATIONS.len()],
                &format!("tail{i}"),
            )
            .unwrap()
        })
        .collect()
}

impl CausalScorer for CorpusLm {
    fn model_tag(&self) -> &str {
        "corpus-lm"
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(-(sentence.len() as f64))
    }
}

/// Forwards to a shared model so the caller can keep counting its calls.
pub struct Shared<T>(pub Arc<T>);

impl<T: MaskedScorer> MaskedScorer for Shared<T> {
    fn model_tag(&self) -> &str {
        self.0.model_tag()
    }

    fn masked_probabilities(&self, query: &MaskedQuery) -> Result<Vec<TokenProbability>, BackendError> {
        self.0.masked_probabilities(query)
    }
}

impl<T: CausalScorer> CausalScorer for Shared<T> {
    fn model_tag(&self) -> &str {
        CausalScorer::model_tag(&*self.0)
    }

    fn causal_log_likelihood(&self, sentence: &[String]) -> Result<f64, BackendError> {
        self.0.causal_log_likelihood(sentence)
    }
}

/// Corpus model trained on the template sentences of `facts`.
pub fn corpus_lm_for(facts: &[triplemine_core::triple::Triple]) -> CorpusLm {
    use triplemine_core::generate::{generate_deterministic, DeterministicMode};
    use triplemine_core::morpho::Morphology;
    use triplemine_core::templates::TemplateRegistry;
    let sentences = facts
        .iter()
        .map(|t| {
            generate_deterministic(
                t,
                DeterministicMode::Template,
                TemplateRegistry::bundled(),
                Morphology::bundled(),
            )
            .unwrap()
            .words
        })
        .collect();
    CorpusLm::new(sentences)
}
