//! Embedding tables and model hyperparameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Time;
use crate::error::{Error, Result};

/// Plumbing hyperparameters of the base scorer and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Embedding dimension d.
    pub dim: usize,
    pub learning_rate: f64,
    /// Decoupled weight decay applied to rows touched by a step.
    pub weight_decay: f64,
    /// Negative objects per positive (K).
    pub negatives: usize,
    pub batch_size: usize,
    /// Days per time bucket. 0 means "use the bundle's snapshot window".
    pub bucket_width: i64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            learning_rate: 0.05,
            weight_decay: 0.0,
            negatives: 10,
            batch_size: 128,
            bucket_width: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "negatives and batch_size must be positive".into(),
            ));
        }
        if self.bucket_width < 0 {
            return Err(Error::Config("bucket_width must be >= 0".into()));
        }
        Ok(())
    }

    /// Row-initialization half-width: uniform in `[-0.5/sqrt(d), 0.5/sqrt(d)]`.
    pub fn init_scale(&self) -> f64 {
        0.5 / (self.dim as f64).sqrt()
    }
}

/// A dense row-major matrix of f64 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Rows initialized uniformly in `[-scale, scale]`.
    pub fn init_uniform(rows: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut e = Self::zeros(rows, dim);
        for v in &mut e.data {
            *v = rng.gen_range(-scale..=scale);
        }
        e
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn try_row(&self, i: usize) -> Result<&[f64]> {
        if i >= self.rows {
            return Err(Error::IdOutOfRange(format!(
                "row {i} out of {} rows",
                self.rows
            )));
        }
        Ok(self.row(i))
    }

    /// Append rows, filling each new row via `fill`.
    pub fn grow(&mut self, new_rows: usize, mut fill: impl FnMut(&mut [f64])) {
        while self.rows < new_rows {
            let start = self.data.len();
            self.data.resize(start + self.dim, 0.0);
            fill(&mut self.data[start..]);
            self.rows += 1;
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn from_data(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding data length {} != {rows} x {dim}",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }
}

/// Model state θ: entity, relation, and time-bucket embedding tables.
///
/// The relation table holds `2 * num_relations` rows — row `r + num_relations`
/// is the inverse direction of relation `r`, which is how subject prediction
/// is reduced to object prediction. The entity table grows as new entities
/// appear in later snapshots; relation and bucket tables are fixed up front.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub entities: Embedding,
    pub relations: Embedding,
    pub buckets: Embedding,
    /// Days per time bucket; times at or past the last bucket clamp to it.
    pub bucket_width: i64,
}

impl ModelParams {
    /// Fresh parameters with an empty entity table. `num_relations` is the
    /// raw relation count (the table gets twice as many rows).
    pub fn init(
        num_relations: usize,
        num_buckets: usize,
        bucket_width: i64,
        cfg: &ModelConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if num_relations == 0 || num_buckets == 0 || bucket_width <= 0 {
            return Err(Error::Config(
                "need at least one relation, one bucket, and a positive bucket width".into(),
            ));
        }
        let scale = cfg.init_scale();
        Ok(Self {
            entities: Embedding::zeros(0, cfg.dim),
            relations: Embedding::init_uniform(num_relations * 2, cfg.dim, scale, rng),
            buckets: Embedding::init_uniform(num_buckets, cfg.dim, scale, rng),
            bucket_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.entities.dim()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    /// Bucket index for a timestamp, clamped to the table.
    pub fn bucket_of(&self, time: Time) -> usize {
        let b = (time.max(0) / self.bucket_width) as usize;
        b.min(self.buckets.rows().saturating_sub(1))
    }

    /// Grow the entity table to `new_total` rows, initializing fresh rows
    /// uniformly in `[-scale, scale]` from `rng`.
    pub fn grow_entities(&mut self, new_total: usize, scale: f64, rng: &mut impl Rng) {
        self.entities.grow(new_total, |row| {
            for v in row {
                *v = rng.gen_range(-scale..=scale);
            }
        });
    }

    /// True when every value in every table is finite.
    pub fn all_finite(&self) -> bool {
        self.entities.data().iter().all(|v| v.is_finite())
            && self.relations.data().iter().all(|v| v.is_finite())
            && self.buckets.data().iter().all(|v| v.is_finite())
    }
}
