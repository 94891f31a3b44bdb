//! Experience-replay buffer with reservoir retention.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Quadruple;
use crate::error::{Error, Result};

/// A bounded multiset of past training quads. Retention is reservoir
/// sampling (Algorithm R): after streaming `N >= capacity` items every item
/// has inclusion probability `capacity / N`, so the buffer stays an unbiased
/// sample of the whole history in O(capacity) memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Quadruple>,
    seen: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            seen: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items streamed through the buffer so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[Quadruple] {
        &self.items
    }

    /// Stream one quad through the reservoir.
    pub fn observe(&mut self, quad: Quadruple, rng: &mut impl Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(quad);
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = quad;
            }
        }
    }

    pub fn extend(&mut self, quads: &[Quadruple], rng: &mut impl Rng) {
        for q in quads {
            self.observe(*q, rng);
        }
    }

    /// `current` interleaved with `ceil(fraction · |current|)` uniform draws
    /// from the buffer. An empty buffer yields `current` unchanged (the
    /// task-1 case). Does not update the buffer.
    pub fn mix(
        &self,
        current: Vec<Quadruple>,
        fraction: f64,
        rng: &mut impl Rng,
    ) -> Result<Vec<Quadruple>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!(
                "replay fraction must be in [0, 1], got {fraction}"
            )));
        }
        let draws = (fraction * current.len() as f64).ceil() as usize;
        if draws == 0 || self.items.is_empty() {
            return Ok(current);
        }
        let mut out = current;
        for _ in 0..draws {
            out.push(self.items[rng.gen_range(0..self.items.len())]);
        }
        out.shuffle(rng);
        Ok(out)
    }
}

/// Mix replayed quads into `current`, then stream `current` through the
/// buffer's reservoir.
pub fn replay_mix(
    current: Vec<Quadruple>,
    buffer: &mut ReplayBuffer,
    fraction: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Quadruple>> {
    let mixed = buffer.mix(current.clone(), fraction, rng)?;
    buffer.extend(&current, rng);
    Ok(mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn q(i: usize) -> Quadruple {
        Quadruple::new(i, 0, i, i as i64)
    }

    #[test]
    fn fraction_zero_is_identity() {
        let mut rng = stream_rng(1, Stream::Replay);
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.extend(&[q(1), q(2)], &mut rng);
        let current = vec![q(10), q(11), q(12)];
        let mixed = buf.mix(current.clone(), 0.0, &mut rng).unwrap();
        assert_eq!(mixed, current);
    }

    #[test]
    fn empty_buffer_yields_only_current() {
        let mut rng = stream_rng(2, Stream::Replay);
        let buf = ReplayBuffer::new(4).unwrap();
        let current = vec![q(1), q(2)];
        assert_eq!(buf.mix(current.clone(), 0.9, &mut rng).unwrap(), current);
    }

    #[test]
    fn full_fraction_doubles_the_stream() {
        let mut rng = stream_rng(3, Stream::Replay);
        let mut buf = ReplayBuffer::new(8).unwrap();
        buf.extend(&[q(1), q(2), q(3)], &mut rng);
        let current: Vec<Quadruple> = (10..20).map(q).collect();
        let mixed = buf.mix(current.clone(), 1.0, &mut rng).unwrap();
        assert_eq!(mixed.len(), 2 * current.len());
        // Everything in the mix came from current or the buffer.
        assert!(mixed
            .iter()
            .all(|m| current.contains(m) || buf.items().contains(m)));
    }

    #[test]
    fn capacity_is_never_exceeded() {
        let mut rng = stream_rng(4, Stream::Replay);
        let mut buf = ReplayBuffer::new(5).unwrap();
        buf.extend(&(0..100).map(q).collect::<Vec<_>>(), &mut rng);
        assert_eq!(buf.len(), 5);
        assert_eq!(buf.seen(), 100);
    }

    #[test]
    fn reservoir_inclusion_is_uniform() {
        // Capacity 2, stream of 4 → every quad should be kept with
        // probability 1/2; Monte-Carlo over 20k trials, 3σ band.
        let mut rng = stream_rng(5, Stream::Replay);
        let trials = 20_000;
        let mut kept = [0f64; 4];
        for _ in 0..trials {
            let mut buf = ReplayBuffer::new(2).unwrap();
            buf.extend(&[q(0), q(1), q(2), q(3)], &mut rng);
            for item in buf.items() {
                kept[item.subject] += 1.0;
            }
        }
        let expected = trials as f64 * 0.5;
        let sigma = (trials as f64 * 0.5 * 0.5).sqrt();
        for (i, &k) in kept.iter().enumerate() {
            assert!(
                (k - expected).abs() < 3.0 * sigma,
                "item {i}: kept {k} vs {expected} ± {}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn replay_mix_updates_the_reservoir_after_mixing() {
        let mut rng = stream_rng(6, Stream::Replay);
        let mut buf = ReplayBuffer::new(10).unwrap();
        let first = vec![q(1), q(2)];
        // First call: buffer empty → mix is identity, then buffer absorbs it.
        let mixed = replay_mix(first.clone(), &mut buf, 0.5, &mut rng).unwrap();
        assert_eq!(mixed, first);
        assert_eq!(buf.len(), 2);
        let second = vec![q(10), q(11), q(12)];
        let mixed = replay_mix(second, &mut buf, 1.0, &mut rng).unwrap();
        assert_eq!(mixed.len(), 6);
        assert_eq!(buf.len(), 5);
    }

    #[test]
    fn invalid_fraction_is_rejected() {
        let mut rng = stream_rng(7, Stream::Replay);
        let buf = ReplayBuffer::new(2).unwrap();
        assert!(buf.mix(vec![q(1)], 1.5, &mut rng).is_err());
    }
}
