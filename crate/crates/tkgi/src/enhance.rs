//! Model-agnostic enhancement layer.
//!
//! For a query `(s, r, ?, t)` the layer looks up entities that recently
//! appeared as subjects of the same relation `r` (a global similarity
//! criterion, independent of graph distance), averages their embeddings with
//! weights that favor recent interactions, and blends the result with the
//! subject's own embedding:
//!
//! ```text
//! e_s = λ·f(s) + φ(d_s)·(1-λ)·g(s,r,t)
//! g(s,r,t) = Σ w_i·e_{s_i} / Σ w_i    over recent subjects s_i of r, t_i < t
//! w_i = 1 / (1 + exp(μ·(t - t_i)))
//! ```
//!
//! φ is a decreasing function of the subject's degree, so sparsely connected
//! entities lean harder on their similar peers while hubs keep their own
//! representation. The per-relation history is a bounded FIFO of the `n`
//! most recent events, which caps the work of one enhancement at `n` row
//! retrievals and `O(n·d)` multiply-adds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::{EntityId, Quadruple, RelationId, Time};
use crate::error::{Error, Result};
use crate::model::{Embedding, SparseGrads};

/// Shape of the degree-decay function φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    /// `φ(d) = 1 / (1 + ln(1 + d))` — gentle decay, φ(0) = 1.
    InverseLog,
    /// `φ(d) = 1 / (1 + d)`.
    InverseLinear,
    /// `φ(d) = 1` — degree ignored.
    ConstantOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhancementConfig {
    /// Balance between the base representation (λ = 1) and the similar-entity
    /// aggregate (λ = 0).
    pub lambda: f64,
    /// Recency steepness μ; 0 weighs all history equally.
    pub mu: f64,
    /// Most recent events kept per relation (n).
    pub max_similar: usize,
    pub degree_decay: DecayMode,
    /// Do not propagate gradients into the similar entities' embeddings.
    pub stop_gradient: bool,
    /// Drop the query subject itself from its similar set.
    pub exclude_query_subject: bool,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            mu: 0.1,
            max_similar: 10,
            degree_decay: DecayMode::InverseLog,
            stop_gradient: false,
            exclude_query_subject: false,
        }
    }
}

impl EnhancementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.mu < 0.0 || !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.max_similar == 0 {
            return Err(Error::Config("max_similar must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recency weight of an event `t_i` in the past of `t`:
/// `1 / (1 + exp(μ·(t - t_i)))`, in (0, 0.5] and decreasing in the gap.
pub fn recency_weight(mu: f64, t: Time, t_i: Time) -> f64 {
    let gap = (t - t_i) as f64;
    1.0 / (1.0 + (mu * gap).exp())
}

/// φ(d): degree decay, 1 at degree 0 and strictly decreasing (except in
/// `ConstantOne` mode).
pub fn degree_decay(degree: u64, mode: DecayMode) -> f64 {
    let d = degree as f64;
    match mode {
        DecayMode::InverseLog => 1.0 / (1.0 + (1.0 + d).ln()),
        DecayMode::InverseLinear => 1.0 / (1.0 + d),
        DecayMode::ConstantOne => 1.0,
    }
}

/// The blend `λ·f_s + φ(d_s)·(1-λ)·g_s`. With λ = 1 the result is
/// bit-identical to `f_s`.
pub fn combine(f_s: &[f64], g_s: &[f64], degree: u64, cfg: &EnhancementConfig) -> Result<Vec<f64>> {
    if f_s.len() != g_s.len() {
        return Err(Error::DimensionMismatch(format!(
            "f has dim {} but g has dim {}",
            f_s.len(),
            g_s.len()
        )));
    }
    if cfg.lambda == 1.0 {
        return Ok(f_s.to_vec());
    }
    let phi = degree_decay(degree, cfg.degree_decay);
    let lam = cfg.lambda;
    let scale = phi * (1.0 - lam);
    Ok(f_s
        .iter()
        .zip(g_s)
        .map(|(&f, &g)| lam * f + scale * g)
        .collect())
}

/// Per-relation bounded history of recent `(subject, time)` events.
///
/// Events must arrive in non-decreasing time order; each relation keeps only
/// its `capacity` most recent entries. Duplicates are kept — an entity active
/// twice recently counts twice in the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityIndex {
    capacity: usize,
    buffers: Vec<VecDeque<(EntityId, Time)>>,
    last_time: Option<Time>,
}

impl SimilarityIndex {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffers: Vec::new(),
            last_time: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append `(subject, time)` to the relation's buffer, evicting the oldest
    /// entry once the buffer exceeds capacity. Errors if `quad.time` goes
    /// backwards relative to the previously recorded event.
    pub fn record(&mut self, quad: &Quadruple) -> Result<()> {
        if let Some(last) = self.last_time {
            if quad.time < last {
                return Err(Error::TimeRegression(format!(
                    "event at time {} after stream reached {}",
                    quad.time, last
                )));
            }
        }
        self.last_time = Some(quad.time);
        if quad.relation >= self.buffers.len() {
            self.buffers.resize_with(quad.relation + 1, VecDeque::new);
        }
        let buf = &mut self.buffers[quad.relation];
        buf.push_back((quad.subject, quad.time));
        if buf.len() > self.capacity {
            buf.pop_front();
        }
        Ok(())
    }

    /// Buffered events of `relation` strictly earlier than `t`, oldest first.
    pub fn earlier_events(&self, relation: RelationId, t: Time) -> &[(EntityId, Time)] {
        static EMPTY: [(EntityId, Time); 0] = [];
        let Some(buf) = self.buffers.get(relation) else {
            return &EMPTY;
        };
        // Entries are time-ordered, so the strictly-earlier ones are a
        // prefix. A VecDeque that has wrapped exposes two slices; events are
        // only appended, so the prefix is contiguous in (head ++ tail).
        let (head, tail) = buf.as_slices();
        let cut = |s: &[(EntityId, Time)]| s.partition_point(|&(_, ti)| ti < t);
        let h = cut(head);
        if h < head.len() {
            return &head[..h];
        }
        let tl = cut(tail);
        if tl == 0 {
            head
        } else {
            &tail[..tl]
        }
    }

    /// Full buffer contents, relation by relation, for serialization.
    pub fn buffers(&self) -> &[VecDeque<(EntityId, Time)>] {
        &self.buffers
    }

    pub fn last_time(&self) -> Option<Time> {
        self.last_time
    }

    pub fn from_parts(
        capacity: usize,
        buffers: Vec<VecDeque<(EntityId, Time)>>,
        last_time: Option<Time>,
    ) -> Self {
        Self {
            capacity,
            buffers,
            last_time,
        }
    }
}

/// Work performed by enhancement forward passes, for the complexity
/// contract: at most `n` row retrievals and `O(n·d)` multiply-adds per query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub rows_retrieved: u64,
    pub mul_adds: u64,
}

/// One enhanced subject embedding plus what is needed to backpropagate
/// through it.
#[derive(Debug, Clone)]
pub struct Enhancement {
    /// The blended embedding to use in place of `f(s)`.
    pub vector: Vec<f64>,
    /// `(entity, normalized weight)` pairs that formed the aggregate; empty
    /// means the similar set was empty and `vector` is `f(s)` itself.
    pub contributions: Vec<(EntityId, f64)>,
    /// φ(d_s) used in the blend.
    pub phi: f64,
}

impl Enhancement {
    pub fn is_passthrough(&self) -> bool {
        self.contributions.is_empty()
    }
}

/// `ln(1 + exp(x))` without overflow for large `x`.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// The enhancement layer: configuration plus the similarity history.
#[derive(Debug, Clone)]
pub struct Enhancer {
    pub cfg: EnhancementConfig,
    pub index: SimilarityIndex,
}

impl Enhancer {
    pub fn new(cfg: EnhancementConfig) -> Result<Self> {
        cfg.validate()?;
        let index = SimilarityIndex::new(cfg.max_similar);
        Ok(Self { cfg, index })
    }

    pub fn with_index(cfg: EnhancementConfig, index: SimilarityIndex) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, index })
    }

    pub fn record(&mut self, quad: &Quadruple) -> Result<()> {
        self.index.record(quad)
    }

    /// Enhanced embedding for the query `(subject, relation, ?, t)` given the
    /// subject's current incremental degree.
    ///
    /// Weights are normalized in log space, so the ratios survive even when
    /// the raw logistic weights underflow for very old events.
    pub fn enhance(
        &self,
        entities: &Embedding,
        subject: EntityId,
        relation: RelationId,
        t: Time,
        degree: u64,
        counters: &mut WorkCounters,
    ) -> Result<Enhancement> {
        let f_s = entities.try_row(subject)?;
        let dim = entities.dim();
        let events = self.index.earlier_events(relation, t);

        let mut picked: Vec<(EntityId, f64)> = Vec::with_capacity(events.len());
        let mut max_lw = f64::NEG_INFINITY;
        for &(entity, t_i) in events {
            if self.cfg.exclude_query_subject && entity == subject {
                continue;
            }
            // ln w_i = -ln(1 + exp(μ·gap))
            let lw = -ln_1p_exp(self.cfg.mu * (t - t_i) as f64);
            max_lw = max_lw.max(lw);
            picked.push((entity, lw));
        }
        let phi = degree_decay(degree, self.cfg.degree_decay);
        if picked.is_empty() {
            return Ok(Enhancement {
                vector: f_s.to_vec(),
                contributions: Vec::new(),
                phi,
            });
        }

        let mut sum = 0.0;
        for (_, lw) in &mut picked {
            *lw = (*lw - max_lw).exp();
            sum += *lw;
        }
        let contributions: Vec<(EntityId, f64)> = picked
            .into_iter()
            .map(|(entity, w)| (entity, w / sum))
            .collect();

        let mut g = vec![0.0; dim];
        for &(entity, weight) in &contributions {
            let row = entities.try_row(entity)?;
            counters.rows_retrieved += 1;
            for k in 0..dim {
                g[k] += weight * row[k];
            }
            counters.mul_adds += dim as u64;
        }
        counters.mul_adds += dim as u64; // the λ/φ blend below

        let vector = combine(f_s, &g, degree, &self.cfg)?;
        Ok(Enhancement {
            vector,
            contributions,
            phi,
        })
    }

    /// Distribute the loss gradient w.r.t. the enhanced embedding onto the
    /// rows that produced it: λ onto `f(s)` and, unless `stop_gradient` is
    /// set, `φ·(1-λ)·w̄_i` onto each contributing entity.
    pub fn backprop(
        &self,
        subject: EntityId,
        enhancement: &Enhancement,
        grad_out: &[f64],
        grads: &mut SparseGrads,
    ) {
        let dim = grad_out.len();
        if enhancement.is_passthrough() {
            let g = grads.add_entity(subject, dim);
            for k in 0..dim {
                g[k] += grad_out[k];
            }
            return;
        }
        let lam = self.cfg.lambda;
        let g = grads.add_entity(subject, dim);
        for k in 0..dim {
            g[k] += lam * grad_out[k];
        }
        if self.cfg.stop_gradient {
            return;
        }
        let scale = enhancement.phi * (1.0 - lam);
        for &(entity, weight) in &enhancement.contributions {
            let g = grads.add_entity(entity, dim);
            for k in 0..dim {
                g[k] += scale * weight * grad_out[k];
            }
        }
    }
}
