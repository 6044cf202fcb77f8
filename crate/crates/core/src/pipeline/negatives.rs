use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::triple::{LabeledTriple, Triple};

const MAX_ATTEMPTS: usize = 1000;

/// One corrupted copy of every valid triple: a uniformly chosen element
/// (head, relation or tail) is replaced by the same element of another,
/// uniformly chosen triple. The result never equals its source.
pub fn sample_negatives(valid: &[Triple], seed: u64) -> Result<Vec<LabeledTriple>, PipelineError> {
    if valid.len() < 2 {
        return Err(PipelineError::Sampling(format!(
            "need at least 2 valid triples, got {}",
            valid.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(valid.len());
    for (i, source) in valid.iter().enumerate() {
        let mut negative = None;
        for _ in 0..MAX_ATTEMPTS {
            let element = rng.gen_range(0..3);
            // draw from the other triples only
            let mut j = rng.gen_range(0..valid.len() - 1);
            if j >= i {
                j += 1;
            }
            let donor = &valid[j];
            let mut t = source.clone();
            match element {
                0 => t.head = donor.head.clone(),
                1 => t.relation = donor.relation.clone(),
                _ => t.tail = donor.tail.clone(),
            }
            if !t.same_fact(source) {
                t.source_id = source.source_id.as_ref().map(|id| format!("{id}:neg"));
                negative = Some(t);
                break;
            }
        }
        let triple = negative.ok_or_else(|| {
            PipelineError::Sampling(format!("could not corrupt {source}: the pool has no distinct elements"))
        })?;
        out.push(LabeledTriple { triple, label: false });
    }
    Ok(out)
}

/// Valid triples labeled true followed by their sampled negatives.
pub fn with_negatives(valid: &[Triple], seed: u64) -> Result<Vec<LabeledTriple>, PipelineError> {
    let mut data: Vec<LabeledTriple> = valid
        .iter()
        .map(|t| LabeledTriple {
            triple: t.clone(),
            label: true,
        })
        .collect();
    data.extend(sample_negatives(valid, seed)?);
    Ok(data)
}
