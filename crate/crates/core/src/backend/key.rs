use sha2::{Digest, Sha256};

use super::MaskedQuery;

fn put_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

/// Content digest of a masked query under a given model.
pub fn masked_cache_key(query: &MaskedQuery, model_tag: &str) -> String {
    let mut h = Sha256::new();
    put_str(&mut h, "masked");
    put_str(&mut h, model_tag);
    h.update((query.tokens().len() as u64).to_le_bytes());
    for t in query.tokens() {
        put_str(&mut h, t);
    }
    h.update((query.targets().len() as u64).to_le_bytes());
    for t in query.targets() {
        h.update((t.pos as u64).to_le_bytes());
        put_str(&mut h, &t.token);
    }
    hex::encode(h.finalize())
}

/// Content digest of a causal scoring request under a given model.
pub fn causal_cache_key(sentence: &[String], model_tag: &str) -> String {
    let mut h = Sha256::new();
    put_str(&mut h, "causal");
    put_str(&mut h, model_tag);
    h.update((sentence.len() as u64).to_le_bytes());
    for w in sentence {
        put_str(&mut h, w);
    }
    hex::encode(h.finalize())
}
