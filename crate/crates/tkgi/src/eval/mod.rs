//! Ranking-based evaluation: MRR/Hit@k, time-aware filtering, forgetting
//! curves, inductive subsets, and frequency-bucket breakdowns.

mod buckets;
mod forgetting;
mod report;

pub use buckets::{bucketize, BucketReport, BucketRow, BucketSpec};
pub use forgetting::{forgetting_curve, ForgettingCurve};
pub use report::{
    parse_buckets_csv, parse_curve_csv, parse_task_metrics, write_buckets_csv, write_curve_csv,
    write_task_metrics, BucketCsvRow, CurveCsvRow, TaskMetrics, BUCKETS_HEADER, CURVE_HEADER,
};

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{EntityId, Quadruple, RelationId, Time};
use crate::enhance::{Enhancer, WorkCounters};
use crate::error::{Error, Result};
use crate::model::{score_all_objects, ModelParams};

/// Ranking protocol: raw ranks, or time-aware filtered ranks where other
/// true objects of `(s, r, ·, t)` at exactly time `t` are removed from the
/// candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Raw,
    TimeFiltered,
}

/// The rank of one query's true object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankResult {
    /// The directed query quad (inverse queries carry the inverse relation).
    pub query: Quadruple,
    /// 1-based rank; ties count half against the model.
    pub rank: usize,
    /// True when the time-filtered protocol produced this rank.
    pub filtered: bool,
}

/// All known facts keyed by `(subject, relation, time)`, for filtering.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    facts: HashMap<(EntityId, RelationId, Time), Vec<EntityId>>,
}

impl FilterSet {
    /// Build from every directed fact in the dataset (callers expand
    /// inverses first so both query directions are covered).
    pub fn build(quads: impl IntoIterator<Item = Quadruple>) -> Self {
        let mut facts: HashMap<(EntityId, RelationId, Time), Vec<EntityId>> = HashMap::new();
        for q in quads {
            facts
                .entry((q.subject, q.relation, q.time))
                .or_default()
                .push(q.object);
        }
        Self { facts }
    }

    pub fn known_objects(&self, s: EntityId, r: RelationId, t: Time) -> &[EntityId] {
        self.facts
            .get(&(s, r, t))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Rank of `scores[true_object]` among the candidates: one plus the number
/// of strictly higher scores plus half the exact ties, rounded up (ties
/// break against the model). `excluded` candidates are skipped entirely.
fn rank_from_scores(scores: &[f64], true_object: EntityId, excluded: &HashSet<EntityId>) -> usize {
    let true_score = scores[true_object];
    let mut higher = 0usize;
    let mut ties = 0usize;
    for (o, &z) in scores.iter().enumerate() {
        if o == true_object || excluded.contains(&o) {
            continue;
        }
        if z > true_score {
            higher += 1;
        } else if z == true_score {
            ties += 1;
        }
    }
    1 + higher + ties.div_ceil(2)
}

/// A read-only view of everything ranking needs. `enhancer` is present when
/// enhancement is applied to query subjects; `degree_of` supplies the
/// subject's incremental degree at the evaluation step.
pub struct RankContext<'a> {
    pub params: &'a ModelParams,
    pub enhancer: Option<&'a Enhancer>,
    pub filter: &'a FilterSet,
    pub degree_of: &'a dyn Fn(EntityId) -> u64,
}

impl<'a> RankContext<'a> {
    fn subject_vector(
        &self,
        query: &Quadruple,
        counters: &mut WorkCounters,
    ) -> Result<Vec<f64>> {
        match self.enhancer {
            Some(enh) => Ok(enh
                .enhance(
                    &self.params.entities,
                    query.subject,
                    query.relation,
                    query.time,
                    (self.degree_of)(query.subject),
                    counters,
                )?
                .vector),
            None => Ok(self.params.entities.try_row(query.subject)?.to_vec()),
        }
    }

    /// Rank the query's true object under one protocol.
    pub fn rank_query(
        &self,
        query: &Quadruple,
        protocol: Protocol,
        counters: &mut WorkCounters,
    ) -> Result<RankResult> {
        let (raw, filtered) = self.rank_both(query, counters)?;
        Ok(match protocol {
            Protocol::Raw => raw,
            Protocol::TimeFiltered => filtered,
        })
    }

    /// Both protocol ranks from a single scoring pass.
    pub fn rank_both(
        &self,
        query: &Quadruple,
        counters: &mut WorkCounters,
    ) -> Result<(RankResult, RankResult)> {
        if query.relation >= self.params.relations.rows() {
            return Err(Error::IdOutOfRange(format!(
                "relation {} unknown to the model (relations are fixed after snapshot 1)",
                query.relation
            )));
        }
        if query.object >= self.params.num_entities() {
            return Err(Error::IdOutOfRange(format!(
                "query object {} has no embedding row",
                query.object
            )));
        }
        let subject_vec = self.subject_vector(query, counters)?;
        let mut scores = Vec::new();
        score_all_objects(
            self.params,
            &subject_vec,
            query.relation,
            query.time,
            &mut scores,
        )?;

        let none = HashSet::new();
        let raw_rank = rank_from_scores(&scores, query.object, &none);
        let excluded: HashSet<EntityId> = self
            .filter
            .known_objects(query.subject, query.relation, query.time)
            .iter()
            .copied()
            .filter(|&o| o != query.object && o < scores.len())
            .collect();
        let filtered_rank = rank_from_scores(&scores, query.object, &excluded);
        Ok((
            RankResult {
                query: *query,
                rank: raw_rank,
                filtered: false,
            },
            RankResult {
                query: *query,
                rank: filtered_rank,
                filtered: true,
            },
        ))
    }
}

/// MRR and Hit@k over a set of ranked queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mrr: f64,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
    pub count: usize,
}

/// `MRR = mean(1/rank)`, `Hit@k = fraction with rank <= k`.
pub fn metrics(ranks: &[RankResult]) -> Result<MetricSummary> {
    if ranks.is_empty() {
        return Err(Error::Data("no ranks to aggregate".into()));
    }
    let n = ranks.len() as f64;
    let mut mrr = 0.0;
    let (mut h1, mut h3, mut h10) = (0.0, 0.0, 0.0);
    for r in ranks {
        debug_assert!(r.rank >= 1);
        mrr += 1.0 / r.rank as f64;
        if r.rank <= 1 {
            h1 += 1.0;
        }
        if r.rank <= 3 {
            h3 += 1.0;
        }
        if r.rank <= 10 {
            h10 += 1.0;
        }
    }
    Ok(MetricSummary {
        mrr: mrr / n,
        hit1: h1 / n,
        hit3: h3 / n,
        hit10: h10 / n,
        count: ranks.len(),
    })
}

fn mean_summary(parts: &[MetricSummary]) -> MetricSummary {
    let n = parts.len() as f64;
    MetricSummary {
        mrr: parts.iter().map(|p| p.mrr).sum::<f64>() / n,
        hit1: parts.iter().map(|p| p.hit1).sum::<f64>() / n,
        hit3: parts.iter().map(|p| p.hit3).sum::<f64>() / n,
        hit10: parts.iter().map(|p| p.hit10).sum::<f64>() / n,
        count: parts.iter().map(|p| p.count).sum(),
    }
}

/// Metrics of one checkpoint under one protocol: each evaluated set by name
/// (`test_1` … `test_t`, plus inductive sets), with `current` being the
/// newest test set and `average` the unweighted mean over `test_1..=test_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_set: BTreeMap<String, MetricSummary>,
    pub current: MetricSummary,
    pub average: MetricSummary,
}

impl MetricReport {
    /// Assemble from per-test-set summaries 1..=t (index order) plus any
    /// extra named sets.
    pub fn from_test_sets(
        test_sets: &[MetricSummary],
        extra: BTreeMap<String, MetricSummary>,
    ) -> Result<Self> {
        if test_sets.is_empty() {
            return Err(Error::Data("metric report needs at least one test set".into()));
        }
        let mut per_set = extra;
        for (j, summary) in test_sets.iter().enumerate() {
            per_set.insert(format!("test_{}", j + 1), *summary);
        }
        Ok(Self {
            current: *test_sets.last().unwrap(),
            average: mean_summary(test_sets),
            per_set,
        })
    }
}

/// Queries from `test` whose subject or object is unseen (or subject only,
/// when `subject_only` is set) — the inductive slice of a test set.
pub fn inductive_subset(
    test: &[Quadruple],
    unseen: &HashSet<EntityId>,
    subject_only: bool,
) -> Vec<Quadruple> {
    test.iter()
        .filter(|q| {
            unseen.contains(&q.subject) || (!subject_only && unseen.contains(&q.object))
        })
        .copied()
        .collect()
}
