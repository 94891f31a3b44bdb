//! Incremental frequency and degree bookkeeping.

use std::collections::HashSet;

use crate::data::{EntityId, Quadruple, Snapshot};

/// Cumulative per-entity counts over every quadruple observed so far.
///
/// `freq` counts role occurrences: a quad adds one to its subject and one to
/// its object, so a self-loop adds two to its entity. `degree` counts
/// incident quads: one per quad an entity participates in, so a self-loop
/// adds one. Counts are never reset; observing the same quad twice counts it
/// twice, mirroring the training stream.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTracker {
    freq: Vec<u64>,
    degree: Vec<u64>,
}

impl FrequencyTracker {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, entity: EntityId) {
        if entity >= self.freq.len() {
            self.freq.resize(entity + 1, 0);
            self.degree.resize(entity + 1, 0);
        }
    }

    /// Fold a batch of quads into the counts.
    pub fn observe(&mut self, quads: &[Quadruple]) {
        for q in quads {
            self.ensure(q.subject.max(q.object));
            self.freq[q.subject] += 1;
            self.freq[q.object] += 1;
            self.degree[q.subject] += 1;
            if q.object != q.subject {
                self.degree[q.object] += 1;
            }
        }
    }

    /// Role-occurrence count of `entity` (0 if never observed).
    pub fn freq(&self, entity: EntityId) -> u64 {
        self.freq.get(entity).copied().unwrap_or(0)
    }

    /// Incident-quad count of `entity` (0 if never observed).
    pub fn degree(&self, entity: EntityId) -> u64 {
        self.degree.get(entity).copied().unwrap_or(0)
    }

    /// Frequencies indexed by entity id, for snapshotting.
    pub fn freq_table(&self) -> &[u64] {
        &self.freq
    }

    /// Rebuild from serialized tables (checkpoint loading).
    pub fn from_tables(freq: Vec<u64>, degree: Vec<u64>) -> Self {
        debug_assert_eq!(freq.len(), degree.len());
        Self { freq, degree }
    }
}

/// Entities of a `vocab_size` vocabulary that appear nowhere in the prior
/// snapshots nor in the current training data — the inductive set for the
/// current step. Membership is by either role, subject or object.
pub fn unseen_entities(
    vocab_size: usize,
    history: &[Snapshot],
    current_train: &[Quadruple],
) -> HashSet<EntityId> {
    let mut seen = vec![false; vocab_size];
    let mut mark = |q: &Quadruple| {
        if q.subject < vocab_size {
            seen[q.subject] = true;
        }
        if q.object < vocab_size {
            seen[q.object] = true;
        }
    };
    for snapshot in history {
        for q in &snapshot.quads {
            mark(q);
        }
    }
    for q in current_train {
        mark(q);
    }
    seen.iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(e, _)| e)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observing_twice_double_counts() {
        let mut t = FrequencyTracker::new();
        let q = [Quadruple::new(0, 0, 1, 0)];
        t.observe(&q);
        t.observe(&q);
        assert_eq!(t.freq(0), 2);
        assert_eq!(t.freq(1), 2);
        assert_eq!(t.degree(0), 2);
    }

    #[test]
    fn self_loop_counts_both_roles() {
        let mut t = FrequencyTracker::new();
        t.observe(&[Quadruple::new(3, 0, 3, 0)]);
        assert_eq!(t.freq(3), 2);
        assert_eq!(t.degree(3), 1);
    }

    #[test]
    fn observing_nothing_changes_nothing() {
        let mut t = FrequencyTracker::new();
        t.observe(&[Quadruple::new(0, 0, 1, 0)]);
        let before = (t.freq_table().to_vec(), t.degree(0), t.degree(1));
        t.observe(&[]);
        assert_eq!(t.freq_table(), before.0.as_slice());
        assert_eq!(t.degree(0), before.1);
        assert_eq!(t.degree(1), before.2);
    }

    #[test]
    fn counts_match_brute_force_over_any_prefix() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, crate::rng::Stream::Synth);
        let quads: Vec<Quadruple> = (0..500)
            .map(|_| {
                Quadruple::new(
                    rng.gen_range(0..20),
                    rng.gen_range(0..5),
                    rng.gen_range(0..20),
                    rng.gen_range(0..50),
                )
            })
            .collect();
        let mut streamed = FrequencyTracker::new();
        let mut consumed = 0usize;
        for prefix_end in [0usize, 1, 7, 100, 500] {
            streamed.observe(&quads[consumed..prefix_end]);
            consumed = prefix_end;
            for e in 0..20usize {
                let expected = quads[..prefix_end]
                    .iter()
                    .map(|q| (q.subject == e) as u64 + (q.object == e) as u64)
                    .sum::<u64>();
                assert_eq!(streamed.freq(e), expected, "entity {e} prefix {prefix_end}");
            }
        }
    }

    #[test]
    fn unseen_is_the_complement_of_every_source() {
        // vocab {0,1,2}; history mentions 0,1; train mentions 1 → unseen {2}.
        let history = vec![Snapshot {
            index: 1,
            interval: (0, 1),
            quads: vec![Quadruple::new(0, 0, 1, 0)],
        }];
        let train = vec![Quadruple::new(1, 0, 1, 1)];
        let unseen = unseen_entities(3, &history, &train);
        assert_eq!(unseen, HashSet::from([2]));
    }

    #[test]
    fn empty_sources_leave_everything_unseen() {
        let unseen = unseen_entities(4, &[], &[]);
        assert_eq!(unseen.len(), 4);
    }

    #[test]
    fn entity_only_in_test_stays_unseen() {
        // Brute-force union over history ∪ train; an entity that only shows
        // up in the snapshot's test data is not part of either source.
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(5, crate::rng::Stream::Synth);
        for _ in 0..50 {
            let vocab = 12;
            let history: Vec<Snapshot> = (0..2)
                .map(|i| Snapshot {
                    index: i + 1,
                    interval: (i as i64, i as i64 + 1),
                    quads: (0..6)
                        .map(|_| {
                            Quadruple::new(
                                rng.gen_range(0..vocab),
                                0,
                                rng.gen_range(0..vocab),
                                i as i64,
                            )
                        })
                        .collect(),
                })
                .collect();
            let train: Vec<Quadruple> = (0..4)
                .map(|_| Quadruple::new(rng.gen_range(0..vocab), 0, rng.gen_range(0..vocab), 2))
                .collect();
            let unseen = unseen_entities(vocab, &history, &train);
            for e in 0..vocab {
                let in_union = history
                    .iter()
                    .flat_map(|s| s.quads.iter())
                    .chain(train.iter())
                    .any(|q| q.subject == e || q.object == e);
                assert_eq!(unseen.contains(&e), !in_union);
            }
        }
    }
}
