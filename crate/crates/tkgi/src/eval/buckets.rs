//! Long-tail frequency buckets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{metrics, MetricSummary, RankResult};

/// Half-open frequency buckets `[0, b_1), [b_1, b_2), …, [b_last, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    /// Inner boundaries, strictly increasing.
    pub boundaries: Vec<u64>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        Self {
            boundaries: vec![18, 48],
        }
    }
}

impl BucketSpec {
    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(Error::Config("bucket spec needs at least one boundary".into()));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "bucket boundaries must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Index of the bucket holding `freq`.
    pub fn bucket_of(&self, freq: u64) -> usize {
        self.boundaries.partition_point(|&b| b <= freq)
    }

    /// `(lo, hi)` of bucket `i`; `hi` is `None` for the open-ended last one.
    pub fn range(&self, i: usize) -> (u64, Option<u64>) {
        let lo = if i == 0 { 0 } else { self.boundaries[i - 1] };
        let hi = self.boundaries.get(i).copied();
        (lo, hi)
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub lo: u64,
    /// Exclusive upper bound; `None` for the open-ended bucket.
    pub hi: Option<u64>,
    /// `None` when no query fell into the bucket.
    pub summary: Option<MetricSummary>,
    pub count: usize,
}

/// Per-bucket metrics over queries grouped by the incremental frequency of
/// their source (subject) entity when the query entered the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub rows: Vec<BucketRow>,
    pub total: usize,
}

/// Group `(rank, source-entity incremental frequency)` pairs into buckets
/// and compute per-bucket metrics. Callers supply the frequency each query's
/// subject had at the step the query was observed.
pub fn bucketize(entries: &[(RankResult, u64)], spec: &BucketSpec) -> Result<BucketReport> {
    spec.validate()?;
    let mut groups: Vec<Vec<RankResult>> = vec![Vec::new(); spec.len()];
    for (rank, freq) in entries {
        groups[spec.bucket_of(*freq)].push(*rank);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (i, group) in groups.iter().enumerate() {
        let (lo, hi) = spec.range(i);
        rows.push(BucketRow {
            lo,
            hi,
            summary: if group.is_empty() {
                None
            } else {
                Some(metrics(group)?)
            },
            count: group.len(),
        });
    }
    Ok(BucketReport {
        rows,
        total: entries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quadruple;

    fn rr(rank: usize) -> RankResult {
        RankResult {
            query: Quadruple::new(0, 0, 0, 0),
            rank,
            filtered: true,
        }
    }

    #[test]
    fn boundaries_are_half_open() {
        let spec = BucketSpec::default();
        assert_eq!(spec.bucket_of(0), 0);
        assert_eq!(spec.bucket_of(17), 0);
        assert_eq!(spec.bucket_of(18), 1);
        assert_eq!(spec.bucket_of(47), 1);
        assert_eq!(spec.bucket_of(48), 2);
        assert_eq!(spec.bucket_of(10_000), 2);
    }

    #[test]
    fn counts_partition_the_queries() {
        let entries = vec![
            (rr(1), 0),
            (rr(2), 17),
            (rr(3), 18),
            (rr(4), 48),
            (rr(5), 500),
        ];
        let report = bucketize(&entries, &BucketSpec::default()).unwrap();
        let counted: usize = report.rows.iter().map(|r| r.count).sum();
        assert_eq!(counted, report.total);
        assert_eq!(report.rows[0].count, 2);
        assert_eq!(report.rows[1].count, 1);
        assert_eq!(report.rows[2].count, 2);
        assert_eq!(report.rows[0].lo, 0);
        assert_eq!(report.rows[0].hi, Some(18));
        assert_eq!(report.rows[2].hi, None);
    }

    #[test]
    fn empty_buckets_carry_no_summary() {
        let entries = vec![(rr(1), 100)];
        let report = bucketize(&entries, &BucketSpec::default()).unwrap();
        assert!(report.rows[0].summary.is_none());
        assert!(report.rows[2].summary.is_some());
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(bucketize(&[], &BucketSpec { boundaries: vec![] }).is_err());
        assert!(bucketize(
            &[],
            &BucketSpec {
                boundaries: vec![10, 10]
            }
        )
        .is_err());
    }
}
