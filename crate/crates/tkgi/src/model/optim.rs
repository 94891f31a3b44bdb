//! Adaptive-gradient optimizer with sparse row updates.

use crate::error::{Error, Result};
use crate::model::{Embedding, ModelParams, SparseGrads};

/// Per-parameter accumulated squared gradients plus the step sizes.
///
/// The update for a touched slot is `acc += g²; θ -= lr·g/√(acc + ε)` with
/// ε = 1e-8, followed by decoupled weight decay `θ -= lr·wd·θ` on the same
/// row. Slots not referenced by a step are left bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub entity_acc: Embedding,
    pub relation_acc: Embedding,
    pub bucket_acc: Embedding,
}

const EPS: f64 = 1e-8;

impl OptimizerState {
    /// Fresh zeroed accumulators shaped like `params`.
    pub fn new(params: &ModelParams, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            entity_acc: Embedding::zeros(params.num_entities(), params.dim()),
            relation_acc: Embedding::zeros(params.relations.rows(), params.dim()),
            bucket_acc: Embedding::zeros(params.buckets.rows(), params.dim()),
        }
    }

    /// Track entity-table growth with zeroed accumulator rows.
    pub fn grow_entities(&mut self, new_total: usize) {
        self.entity_acc.grow(new_total, |row| row.fill(0.0));
    }
}

fn update_rows(
    table: &mut Embedding,
    acc: &mut Embedding,
    grads: &std::collections::HashMap<usize, Vec<f64>>,
    lr: f64,
    wd: f64,
) -> Result<()> {
    for (&row, g) in grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite gradient on row {row}"
            )));
        }
        if row >= table.rows() {
            return Err(Error::IdOutOfRange(format!(
                "gradient row {row} out of {} rows",
                table.rows()
            )));
        }
        let theta = table.row_mut(row);
        let a = acc.row_mut(row);
        for k in 0..g.len() {
            a[k] += g[k] * g[k];
            theta[k] -= lr * g[k] / (a[k] + EPS).sqrt();
        }
        if wd > 0.0 {
            for v in theta.iter_mut() {
                *v -= lr * wd * *v;
            }
        }
    }
    Ok(())
}

/// Apply one sparse step. Rows are independent, so the outcome does not
/// depend on map iteration order. `grads.subject_overrides` must already
/// have been folded back into the entity map by the caller.
pub fn apply_step(
    params: &mut ModelParams,
    state: &mut OptimizerState,
    grads: &SparseGrads,
) -> Result<()> {
    let lr = state.learning_rate;
    let wd = state.weight_decay;
    update_rows(&mut params.entities, &mut state.entity_acc, &grads.entity, lr, wd)?;
    update_rows(
        &mut params.relations,
        &mut state.relation_acc,
        &grads.relation,
        lr,
        wd,
    )?;
    update_rows(&mut params.buckets, &mut state.bucket_acc, &grads.bucket, lr, wd)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::rng::{stream_rng, Stream};

    fn setup() -> (ModelParams, OptimizerState) {
        let cfg = ModelConfig {
            dim: 4,
            ..Default::default()
        };
        let mut rng = stream_rng(3, Stream::Init);
        let mut p = ModelParams::init(2, 2, 5, &cfg, &mut rng).unwrap();
        p.grow_entities(6, cfg.init_scale(), &mut rng);
        let s = OptimizerState::new(&p, 0.1, 0.0);
        (p, s)
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let acc_before = s.entity_acc.clone();
        let mut grads = SparseGrads::default();
        grads.add_entity(1, 4); // explicit zero gradient
        apply_step(&mut p, &mut s, &grads).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.entity_acc, acc_before);
    }

    #[test]
    fn first_unit_step_moves_by_learning_rate() {
        let (mut p, mut s) = setup();
        let before = p.entities.row(2)[0];
        let mut grads = SparseGrads::default();
        grads.add_entity(2, 4)[0] = 1.0;
        apply_step(&mut p, &mut s, &grads).unwrap();
        let delta = p.entities.row(2)[0] - before;
        // acc becomes 1, so Δθ = -0.1 / sqrt(1 + 1e-8)
        let expected = -0.1 / (1.0_f64 + 1e-8).sqrt();
        assert!((delta - expected).abs() < 1e-15);
        assert!((delta + 0.1).abs() < 1e-8);
    }

    #[test]
    fn repeated_steps_shrink() {
        let (mut p, mut s) = setup();
        let x0 = p.entities.row(0)[1];
        let mut grads = SparseGrads::default();
        grads.add_entity(0, 4)[1] = 0.5;
        apply_step(&mut p, &mut s, &grads).unwrap();
        let x1 = p.entities.row(0)[1];
        apply_step(&mut p, &mut s, &grads).unwrap();
        let x2 = p.entities.row(0)[1];
        assert!((x1 - x0).abs() > (x2 - x1).abs());
    }

    #[test]
    fn untouched_rows_are_bit_identical() {
        let (mut p, mut s) = setup();
        let frozen_row = p.entities.row(5).to_vec();
        let frozen_rel = p.relations.row(3).to_vec();
        let mut grads = SparseGrads::default();
        grads.add_entity(0, 4)[0] = 0.3;
        grads.relation.insert(1, vec![0.1, -0.2, 0.0, 0.4]);
        for _ in 0..10 {
            apply_step(&mut p, &mut s, &grads).unwrap();
        }
        assert_eq!(p.entities.row(5), frozen_row.as_slice());
        assert_eq!(p.relations.row(3), frozen_rel.as_slice());
    }

    #[test]
    fn non_finite_gradient_is_a_divergence_error() {
        let (mut p, mut s) = setup();
        let mut grads = SparseGrads::default();
        grads.add_entity(0, 4)[0] = f64::NAN;
        assert!(matches!(
            apply_step(&mut p, &mut s, &grads),
            Err(Error::Divergence(_))
        ));
    }
}
