//! Base temporal embedding scorer: parameters, analytic-gradient loss,
//! adaptive-gradient optimizer, negative sampling, and checkpoints.

mod checkpoint;
mod loss;
mod negative;
mod optim;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::{loss_and_grads, score, score_all_objects, SparseGrads, TrainBatch};
pub use negative::sample_negatives;
pub use optim::{apply_step, OptimizerState};
pub use params::{Embedding, ModelConfig, ModelParams};
