//! Trilinear temporal scorer and its analytic gradients.
//!
//! The score of `(s, r, o, τ)` is `Σ_k e_s[k] · (w_r[k] + v_b(τ)[k]) · e_o[k]`:
//! a bilinear-diagonal product where the relation vector is offset by the
//! embedding of the time bucket containing τ. Training minimizes softmax
//! cross-entropy of the true object against K sampled negatives. Gradients
//! are closed-form and touch only the rows a batch references.

use std::collections::HashMap;

use crate::data::{EntityId, Quadruple, Time};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A batch of positives with pre-sampled negative objects,
/// `negatives[i].len() == K` for every positive `i`.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub positives: Vec<Quadruple>,
    pub negatives: Vec<Vec<EntityId>>,
}

impl TrainBatch {
    pub fn new(positives: Vec<Quadruple>, negatives: Vec<Vec<EntityId>>) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::Data("empty training batch".into()));
        }
        if positives.len() != negatives.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positives but {} negative lists",
                positives.len(),
                negatives.len()
            )));
        }
        for (pos, negs) in positives.iter().zip(&negatives) {
            if negs.iter().any(|&n| n == pos.object) {
                return Err(Error::Data(
                    "negative candidates must exclude the true object".into(),
                ));
            }
        }
        Ok(Self {
            positives,
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Gradients keyed by the rows a batch touched.
///
/// When subject overrides are supplied to [`loss_and_grads`], the gradient
/// with respect to each override vector lands in `subject_overrides` instead
/// of the entity map, so a caller that produced the overrides (the
/// enhancement layer) can chain its own backward pass.
#[derive(Debug, Clone, Default)]
pub struct SparseGrads {
    pub entity: HashMap<usize, Vec<f64>>,
    pub relation: HashMap<usize, Vec<f64>>,
    pub bucket: HashMap<usize, Vec<f64>>,
    /// One gradient per positive, parallel to the batch; empty when no
    /// overrides were supplied.
    pub subject_overrides: Vec<Vec<f64>>,
}

impl SparseGrads {
    pub fn add_entity(&mut self, id: usize, dim: usize) -> &mut Vec<f64> {
        self.entity.entry(id).or_insert_with(|| vec![0.0; dim])
    }

    pub fn is_finite(&self) -> bool {
        let ok = |m: &HashMap<usize, Vec<f64>>| {
            m.values().all(|v| v.iter().all(|x| x.is_finite()))
        };
        ok(&self.entity)
            && ok(&self.relation)
            && ok(&self.bucket)
            && self
                .subject_overrides
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn axpy(acc: &mut [f64], scale: f64, a: &[f64], b: &[f64]) {
    for k in 0..acc.len() {
        acc[k] += scale * a[k] * b[k];
    }
}

/// Score one candidate quad. `subject_override`, when given, replaces the
/// subject's embedding row — the hook the enhancement layer plugs into.
pub fn score(
    params: &ModelParams,
    subject: EntityId,
    relation: usize,
    object: EntityId,
    time: Time,
    subject_override: Option<&[f64]>,
) -> Result<f64> {
    let e_o = params.entities.try_row(object)?;
    let e_s = match subject_override {
        Some(v) => {
            if v.len() != params.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "override dim {} != model dim {}",
                    v.len(),
                    params.dim()
                )));
            }
            v
        }
        None => params.entities.try_row(subject)?,
    };
    let w_r = params.relations.try_row(relation)?;
    let v_b = params.buckets.row(params.bucket_of(time));
    let mut total = 0.0;
    for k in 0..params.dim() {
        total += e_s[k] * (w_r[k] + v_b[k]) * e_o[k];
    }
    Ok(total)
}

/// Scores of `subject_vec` against every entity row, written into `out`.
/// One pass precomputes `e_s ⊙ (w_r + v_b)` so each candidate costs d mults.
pub fn score_all_objects(
    params: &ModelParams,
    subject_vec: &[f64],
    relation: usize,
    time: Time,
    out: &mut Vec<f64>,
) -> Result<()> {
    let w_r = params.relations.try_row(relation)?;
    let v_b = params.buckets.row(params.bucket_of(time));
    let dim = params.dim();
    let mut lhs = vec![0.0; dim];
    for k in 0..dim {
        lhs[k] = subject_vec[k] * (w_r[k] + v_b[k]);
    }
    out.clear();
    out.reserve(params.num_entities());
    for o in 0..params.num_entities() {
        let e_o = params.entities.row(o);
        let mut z = 0.0;
        for k in 0..dim {
            z += lhs[k] * e_o[k];
        }
        out.push(z);
    }
    Ok(())
}

/// Mean softmax cross-entropy of each true object against its negatives,
/// with analytic gradients for every touched row.
///
/// `subject_overrides[i]`, when given, replaces positive `i`'s subject
/// embedding in the forward pass, and the gradient w.r.t. that vector is
/// returned in `SparseGrads::subject_overrides` (the entity map then carries
/// no direct subject gradient for that positive).
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &TrainBatch,
    subject_overrides: Option<&[Vec<f64>]>,
) -> Result<(f64, SparseGrads)> {
    if batch.is_empty() {
        return Err(Error::Data("empty training batch".into()));
    }
    if let Some(ov) = subject_overrides {
        if ov.len() != batch.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} overrides for {} positives",
                ov.len(),
                batch.len()
            )));
        }
    }
    let dim = params.dim();
    let inv_n = 1.0 / batch.len() as f64;
    let mut grads = SparseGrads::default();
    if subject_overrides.is_some() {
        grads.subject_overrides = vec![vec![0.0; dim]; batch.len()];
    }
    let mut total_loss = 0.0;

    for (i, pos) in batch.positives.iter().enumerate() {
        let e_s: &[f64] = match subject_overrides {
            Some(ov) => &ov[i],
            None => params.entities.try_row(pos.subject)?,
        };
        let w_r = params.relations.try_row(pos.relation)?;
        let bucket = params.bucket_of(pos.time);
        let v_b = params.buckets.row(bucket);
        let mut m = vec![0.0; dim];
        for k in 0..dim {
            m[k] = w_r[k] + v_b[k];
        }

        // Candidate 0 is the true object.
        let negs = &batch.negatives[i];
        let mut candidates = Vec::with_capacity(1 + negs.len());
        candidates.push(pos.object);
        candidates.extend_from_slice(negs);

        let mut scores = Vec::with_capacity(candidates.len());
        for &o in &candidates {
            let e_o = params.entities.try_row(o)?;
            let mut z = 0.0;
            for k in 0..dim {
                z += e_s[k] * m[k] * e_o[k];
            }
            scores.push(z);
        }

        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = scores.iter().map(|&z| (z - max).exp()).sum();
        total_loss += max + sum_exp.ln() - scores[0];

        // dL/dz_j = softmax_j - 1[j == 0], scaled by the batch mean.
        for (j, &o) in candidates.iter().enumerate() {
            let p = (scores[j] - max).exp() / sum_exp;
            let dz = (p - if j == 0 { 1.0 } else { 0.0 }) * inv_n;
            let e_o = params.entities.row(o);

            if subject_overrides.is_some() {
                axpy(&mut grads.subject_overrides[i], dz, &m, e_o);
            } else {
                let g = grads.add_entity(pos.subject, dim);
                axpy(g, dz, &m, e_o);
            }
            let g_rel = grads
                .relation
                .entry(pos.relation)
                .or_insert_with(|| vec![0.0; dim]);
            axpy(g_rel, dz, e_s, e_o);
            let g_bkt = grads.bucket.entry(bucket).or_insert_with(|| vec![0.0; dim]);
            axpy(g_bkt, dz, e_s, e_o);
            let g_obj = grads.add_entity(o, dim);
            axpy(g_obj, dz, e_s, &m);
        }
    }

    Ok((total_loss * inv_n, grads))
}
