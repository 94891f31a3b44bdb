//! Diagonal-Fisher weight consolidation.

use rand::Rng;

use crate::data::{with_inverses, Quadruple};
use crate::error::{Error, Result};
use crate::model::{
    loss_and_grads, sample_negatives, Embedding, ModelParams, SparseGrads, TrainBatch,
};

/// Per-parameter importance estimates plus the anchor parameters they were
/// measured at. Importances accumulate additively across consolidations
/// (online EWC), keeping memory at one extra copy of θ.
///
/// Rows beyond an anchor table's size (entities that appeared after the last
/// consolidation) carry no penalty until consolidated once.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub entity: Embedding,
    pub relation: Embedding,
    pub bucket: Embedding,
    pub anchor: ModelParams,
}

impl FisherInfo {
    /// The penalty value `strength · Σ F ⊙ (θ - θ*)²` over anchored rows.
    pub fn penalty_value(&self, params: &ModelParams, strength: f64) -> f64 {
        let term = |imp: &Embedding, now: &Embedding, anchor: &Embedding| {
            let mut total = 0.0;
            for row in 0..imp.rows().min(now.rows()) {
                let (f, t, a) = (imp.row(row), now.row(row), anchor.row(row));
                for k in 0..f.len() {
                    let d = t[k] - a[k];
                    total += f[k] * d * d;
                }
            }
            total
        };
        strength
            * (term(&self.entity, &params.entities, &self.anchor.entities)
                + term(&self.relation, &params.relations, &self.anchor.relations)
                + term(&self.bucket, &params.buckets, &self.anchor.buckets))
    }

    /// Add the penalty gradient `2·strength·F ⊙ (θ - θ*)` to the rows the
    /// batch already touches. Untouched rows have not moved since the last
    /// step, so restricting the pull to touched rows keeps updates sparse
    /// without changing which parameters feel the anchor.
    pub fn add_penalty_grads(
        &self,
        params: &ModelParams,
        strength: f64,
        grads: &mut SparseGrads,
    ) {
        let apply = |imp: &Embedding,
                     now: &Embedding,
                     anchor: &Embedding,
                     rows: &mut std::collections::HashMap<usize, Vec<f64>>| {
            for (&row, g) in rows.iter_mut() {
                if row >= imp.rows() {
                    continue;
                }
                let (f, t, a) = (imp.row(row), now.row(row), anchor.row(row));
                for k in 0..g.len() {
                    g[k] += 2.0 * strength * f[k] * (t[k] - a[k]);
                }
            }
        };
        apply(
            &self.entity,
            &params.entities,
            &self.anchor.entities,
            &mut grads.entity,
        );
        apply(
            &self.relation,
            &params.relations,
            &self.anchor.relations,
            &mut grads.relation,
        );
        apply(
            &self.bucket,
            &params.buckets,
            &self.anchor.buckets,
            &mut grads.bucket,
        );
    }
}

fn grown(mut e: Embedding, rows: usize) -> Embedding {
    e.grow(rows, |r| r.fill(0.0));
    e
}

/// Estimate diagonal Fisher information as the mean squared per-parameter
/// gradient of the task loss over `sample`, accumulate it into `fisher`
/// (starting from zero when `None`), and re-anchor at the current
/// parameters. Each sampled quad contributes both of its directed examples,
/// matching the training loss.
pub fn ewc_consolidate(
    params: &ModelParams,
    fisher: Option<FisherInfo>,
    sample: &[Quadruple],
    num_relations: usize,
    negatives: usize,
    rng: &mut impl Rng,
) -> Result<FisherInfo> {
    if sample.is_empty() {
        return Err(Error::Data("EWC consolidation needs a non-empty sample".into()));
    }
    let dim = params.dim();
    let mut info = match fisher {
        Some(f) => FisherInfo {
            entity: grown(f.entity, params.num_entities()),
            relation: f.relation,
            bucket: f.bucket,
            anchor: params.clone(),
        },
        None => FisherInfo {
            entity: Embedding::zeros(params.num_entities(), dim),
            relation: Embedding::zeros(params.relations.rows(), dim),
            bucket: Embedding::zeros(params.buckets.rows(), dim),
            anchor: params.clone(),
        },
    };

    let examples = with_inverses(sample, num_relations);
    let scale = 1.0 / examples.len() as f64;
    for example in &examples {
        let negs = sample_negatives(rng, example, negatives, params.num_entities())?;
        let batch = TrainBatch::new(vec![*example], vec![negs])?;
        let (_, grads) = loss_and_grads(params, &batch, None)?;
        let mut fold = |map: &std::collections::HashMap<usize, Vec<f64>>, imp: &mut Embedding| {
            for (&row, g) in map {
                let acc = imp.row_mut(row);
                for k in 0..g.len() {
                    acc[k] += scale * g[k] * g[k];
                }
            }
        };
        fold(&grads.entity, &mut info.entity);
        fold(&grads.relation, &mut info.relation);
        fold(&grads.bucket, &mut info.bucket);
    }
    Ok(info)
}
