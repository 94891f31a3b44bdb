//! Incremental training over a task sequence: fine-tuning, experience
//! replay, Fisher-penalty consolidation, the enhancement/sampling arms, and
//! the dual-checkpoint protocol.

mod ewc;
mod replay;
mod runner;

pub use ewc::{ewc_consolidate, FisherInfo};
pub use replay::{replay_mix, ReplayBuffer};
pub use runner::{hash_bundle_dir, incremental_run, RunMetadata, RunOutput};

use serde::{Deserialize, Serialize};

use crate::enhance::EnhancementConfig;
use crate::error::{Error, Result};
use crate::eval::BucketSpec;
use crate::model::{Checkpoint, ModelConfig};
use crate::sampling::SamplerConfig;

/// Which continual-learning mechanics a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Warm-start from the previous task and keep training.
    Finetune,
    /// Fine-tuning plus a diagonal-Fisher quadratic penalty on parameters
    /// important to earlier tasks.
    Ewc,
    /// Fine-tuning plus replayed quads from a bounded reservoir of past
    /// training data.
    Replay,
    /// Weighted sampling and the enhancement layer together.
    OursFull,
    /// Weighted sampling only.
    OursSamplingOnly,
    /// Enhancement layer only.
    OursEnhancementOnly,
    /// Train on the first snapshot, then freeze (lower-bound baseline).
    FirstSnapshotOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Finetune,
        Strategy::Ewc,
        Strategy::Replay,
        Strategy::OursFull,
        Strategy::OursSamplingOnly,
        Strategy::OursEnhancementOnly,
        Strategy::FirstSnapshotOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Finetune => "finetune",
            Strategy::Ewc => "ewc",
            Strategy::Replay => "replay",
            Strategy::OursFull => "ours-full",
            Strategy::OursSamplingOnly => "ours-sampling-only",
            Strategy::OursEnhancementOnly => "ours-enhancement-only",
            Strategy::FirstSnapshotOnly => "first-snapshot-only",
        }
    }

    pub fn parse(name: &str) -> Result<Strategy> {
        Strategy::ALL
            .iter()
            .find(|s| s.name() == name)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown strategy {name:?}; valid strategies: {}",
                    valid.join(", ")
                ))
            })
    }

    pub fn uses_weighted_sampling(&self) -> bool {
        matches!(self, Strategy::OursFull | Strategy::OursSamplingOnly)
    }

    pub fn uses_enhancement(&self) -> bool {
        matches!(self, Strategy::OursFull | Strategy::OursEnhancementOnly)
    }

    pub fn uses_ewc(&self) -> bool {
        matches!(self, Strategy::Ewc)
    }

    pub fn uses_replay(&self) -> bool {
        matches!(self, Strategy::Replay)
    }

    /// False once past task 1 for the frozen baseline.
    pub fn trains_at(&self, task: usize) -> bool {
        !matches!(self, Strategy::FirstSnapshotOnly) || task == 1
    }
}

/// Fully resolved configuration of one incremental run. Strategy-specific
/// fields are ignored by strategies that do not use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub epochs_per_task: usize,
    /// Carry-checkpoint epochs over valid ∪ test after evaluation.
    pub post_eval_epochs: usize,
    pub ewc_strength: f64,
    /// Quads sampled per task for Fisher estimation.
    pub ewc_sample_size: usize,
    pub replay_buffer_size: usize,
    pub replay_fraction: f64,
    pub enhancement: EnhancementConfig,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    pub seed: u64,
    /// Also evaluate each eval checkpoint on the current validation set
    /// (model selection — used by grid search).
    pub eval_valid: bool,
    /// Restrict inductive subsets to unseen subjects (default: either role).
    pub inductive_subject_only: bool,
    pub buckets: BucketSpec,
    /// Write `task_<t>/checkpoint.{eval,carry}` files into the run directory.
    pub save_checkpoints: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Finetune,
            epochs_per_task: 5,
            post_eval_epochs: 2,
            ewc_strength: 1.0,
            ewc_sample_size: 256,
            replay_buffer_size: 5_000,
            replay_fraction: 0.2,
            enhancement: EnhancementConfig::default(),
            sampler: SamplerConfig::default(),
            model: ModelConfig::default(),
            seed: 0,
            eval_valid: false,
            inductive_subject_only: false,
            buckets: BucketSpec::default(),
            save_checkpoints: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.enhancement.validate()?;
        self.sampler.validate()?;
        self.model.validate()?;
        self.buckets.validate()?;
        if self.ewc_strength < 0.0 {
            return Err(Error::Config("ewc_strength must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.replay_fraction) {
            return Err(Error::Config(format!(
                "replay_fraction must be in [0, 1], got {}",
                self.replay_fraction
            )));
        }
        if self.replay_buffer_size == 0 {
            return Err(Error::Config("replay_buffer_size must be >= 1".into()));
        }
        if self.ewc_sample_size == 0 {
            return Err(Error::Config("ewc_sample_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// The dual checkpoints of one task: `eval` is scored (trained on the task's
/// training data only) and `carry` additionally trained on valid ∪ test to
/// seed the next task.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPair {
    pub eval: Checkpoint,
    pub carry: Checkpoint,
}
