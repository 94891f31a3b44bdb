//! Forgetting curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lower-triangular performance matrix `p[t][j]` (model after task `t+1`
/// evaluated on test set `j+1`) and its per-step averages
/// `P_t = (1/t) Σ_{j<=t} p_{t,j}` — the curve whose decline measures
/// catastrophic forgetting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingCurve {
    pub matrix: Vec<Vec<f64>>,
    pub averages: Vec<f64>,
}

/// Build the curve from a lower-triangular matrix: row `t` (0-based) must
/// hold exactly `t + 1` entries, each in [0, 1].
pub fn forgetting_curve(matrix: Vec<Vec<f64>>) -> Result<ForgettingCurve> {
    for (t, row) in matrix.iter().enumerate() {
        if row.len() != t + 1 {
            return Err(Error::Data(format!(
                "forgetting matrix row {t} has {} entries, expected {}",
                row.len(),
                t + 1
            )));
        }
        if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!(
                "forgetting matrix row {t} holds out-of-range value {bad}"
            )));
        }
    }
    let averages = matrix
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    Ok(ForgettingCurve { matrix, averages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_task_average_is_itself() {
        let c = forgetting_curve(vec![vec![0.5]]).unwrap();
        assert_eq!(c.averages, vec![0.5]);
    }

    #[test]
    fn two_task_average_is_the_mean() {
        let c = forgetting_curve(vec![vec![0.7], vec![0.5, 0.3]]).unwrap();
        assert!((c.averages[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_gives_constant_curve() {
        let matrix: Vec<Vec<f64>> = (0..5).map(|t| vec![0.25; t + 1]).collect();
        let c = forgetting_curve(matrix).unwrap();
        assert!(c.averages.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn shape_and_range_are_enforced() {
        assert!(forgetting_curve(vec![vec![0.5, 0.5]]).is_err());
        assert!(forgetting_curve(vec![vec![1.5]]).is_err());
    }
}
