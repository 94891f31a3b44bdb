//! Incremental training and evaluation toolkit for temporal knowledge graph
//! completion.
//!
//! A temporal knowledge graph (TKG) is a set of timestamped facts
//! `(subject, relation, object, time)`. This crate trains completion models
//! on a TKG snapshot by snapshot instead of all at once, and measures how
//! well each strategy copes with new entities, rare entities, and
//! catastrophic forgetting.
//!
//! The pieces, bottom to top:
//!
//! - [`data`] — quadruples, vocabularies, snapshot construction with
//!   extrapolation splits, and incremental frequency bookkeeping.
//! - [`model`] — a trilinear temporal embedding scorer with closed-form
//!   gradients, an adaptive-gradient optimizer, and bit-exact checkpoints.
//! - [`enhance`] — the model-agnostic enhancement layer: a per-relation
//!   history of recent subjects, recency-weighted aggregation, and a
//!   degree-scaled blend with the base embedding.
//! - [`sampling`] — two-phase epoch sampling that up-weights quadruples
//!   involving rare entities.
//! - [`continual`] — the incremental runner with fine-tuning, experience
//!   replay, and Fisher-penalty (EWC) strategies, plus the dual-checkpoint
//!   protocol that trains on validation/test data only after evaluation.
//! - [`eval`] — filtered/raw ranking, MRR and Hit@k, forgetting curves,
//!   inductive subsets, and frequency-bucket reports.
//! - [`synth`] — a seeded corpus generator with a controllable long tail
//!   and planted relation→object structure, for desk-scale experiments.
//! - [`cli`] — the `tkgi` command implementations (`snapshots`, `synth`,
//!   `train`, `grid`, `report`).
//!
//! Every run is deterministic given its seed: same config, same bytes out.
//! See the crate's `examples/` directory for a runnable tour of each
//! capability.

pub mod cli;
pub mod config;
pub mod continual;
pub mod data;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
