//! Negative-object sampling.

use rand::Rng;

use crate::data::{EntityId, Quadruple};
use crate::error::{Error, Result};

/// Draw `k` object ids uniformly from `[0, vocab_size)` excluding the true
/// object (duplicates among the draws are allowed). Deterministic given the
/// generator state.
pub fn sample_negatives(
    rng: &mut impl Rng,
    positive: &Quadruple,
    k: usize,
    vocab_size: usize,
) -> Result<Vec<EntityId>> {
    if k >= vocab_size {
        return Err(Error::Config(format!(
            "cannot draw {k} negatives from a vocabulary of {vocab_size}"
        )));
    }
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let candidate = rng.gen_range(0..vocab_size);
        if candidate != positive.object {
            out.push(candidate);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn two_entity_vocab_forces_the_other_one() {
        let mut rng = stream_rng(1, Stream::Negatives);
        let pos = Quadruple::new(0, 0, 0, 0);
        for _ in 0..50 {
            assert_eq!(sample_negatives(&mut rng, &pos, 1, 2).unwrap(), vec![1]);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let pos = Quadruple::new(0, 0, 3, 0);
        let mut a = stream_rng(9, Stream::Negatives);
        let mut b = stream_rng(9, Stream::Negatives);
        for _ in 0..20 {
            assert_eq!(
                sample_negatives(&mut a, &pos, 5, 50).unwrap(),
                sample_negatives(&mut b, &pos, 5, 50).unwrap()
            );
        }
    }

    #[test]
    fn k_at_or_above_vocab_size_errors() {
        let mut rng = stream_rng(1, Stream::Negatives);
        let pos = Quadruple::new(0, 0, 0, 0);
        assert!(sample_negatives(&mut rng, &pos, 2, 2).is_err());
    }

    #[test]
    fn draws_are_near_uniform_over_the_allowed_set() {
        // 3σ band around the expected uniform count, per candidate.
        let mut rng = stream_rng(42, Stream::Negatives);
        let pos = Quadruple::new(0, 0, 17, 0);
        let vocab = 100;
        let draws = 100_000;
        let mut counts = vec![0u64; vocab];
        for _ in 0..draws {
            for id in sample_negatives(&mut rng, &pos, 1, vocab).unwrap() {
                counts[id] += 1;
            }
        }
        assert_eq!(counts[17], 0);
        let p = 1.0 / (vocab as f64 - 1.0);
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (id, &c) in counts.iter().enumerate() {
            if id == 17 {
                continue;
            }
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "candidate {id}: {c} vs expected {expected:.1} ± {:.1}",
                3.0 * sigma
            );
        }
    }
}
