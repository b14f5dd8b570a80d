//! Error functionals: mean squared error on a sample set, error against
//! rotated ground truth, and the model's own equivariance defect.

use serde::{Deserialize, Serialize};

use crate::cases::{CaseKind, RotationEvalSet};
use crate::error::{invalid, Result};
use crate::pipeline::{Arm, TuplePredictor};
use crate::predictors::ModelKind;

/// Squared Euclidean distance between two equal-length vectors.
pub fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(1/N) Σ ‖yᵢ − f(xᵢ)‖²` over row-major feature and label matrices.
pub fn mse<F>(mut f: F, features: &[f64], labels: &[f64], input_dim: usize, output_dim: usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if features.is_empty() || input_dim == 0 || output_dim == 0 {
        return Err(invalid!("cannot take the error of an empty slice"));
    }
    let n = features.len() / input_dim;
    if n * input_dim != features.len() || n * output_dim != labels.len() {
        return Err(invalid!("feature and label matrices disagree in row count"));
    }
    let mut total = 0.0;
    for (x, y) in features.chunks_exact(input_dim).zip(labels.chunks_exact(output_dim)) {
        let pred = f(x)?;
        if pred.len() != output_dim {
            return Err(invalid!("prediction has length {}, expected {output_dim}", pred.len()));
        }
        total += squared_error(&pred, y);
    }
    Ok(total / n as f64)
}

/// `(1/N) Σ ‖M(Rᵢ X₀) − Rᵢ y₀‖²`.
pub fn rotation_data_error(model: &dyn TuplePredictor, set: &RotationEvalSet) -> Result<f64> {
    if set.is_empty() {
        return Err(invalid!("rotation set is empty"));
    }
    let mut total = 0.0;
    for i in 0..set.len() {
        let (x, y) = set.rotated(i)?;
        total += squared_error(model.predict(&x)?.data(), y.data());
    }
    Ok(total / set.len() as f64)
}

/// `(1/N) Σ ‖M(Rᵢ X₀) − Rᵢ M(X₀)‖²`.
pub fn rotation_model_error(model: &dyn TuplePredictor, set: &RotationEvalSet) -> Result<f64> {
    if set.is_empty() {
        return Err(invalid!("rotation set is empty"));
    }
    let base = model.predict(&set.base_input)?;
    let mut total = 0.0;
    for (i, r) in set.rotations.iter().enumerate() {
        let (x, _) = set.rotated(i)?;
        total += squared_error(model.predict(&x)?.data(), base.rotate(r)?.data());
    }
    Ok(total / set.len() as f64)
}

/// Percentage reduction of `ours` relative to `baseline`.
pub fn error_reduction(ours: f64, baseline: f64) -> f64 {
    100.0 * (1.0 - ours / baseline)
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub case: CaseKind,
    pub model: ModelKind,
    pub arm: Arm,
    /// Total generated samples.
    pub n: usize,
    pub n_train: usize,
    pub seed: u64,
    #[serde(rename = "train_E")]
    pub train_e: f64,
    #[serde(rename = "test_E")]
    pub test_e: f64,
    /// Absent for the standard-only arm, which never sees raw frames.
    #[serde(rename = "E_D")]
    pub e_d: Option<f64>,
    #[serde(rename = "E_M")]
    pub e_m: Option<f64>,
    /// Percent, relative to the baseline row; absent on the baseline itself.
    pub error_reduction_train: Option<f64>,
    pub error_reduction_test: Option<f64>,
}

impl EvalReport {
    pub const COLUMNS: [&'static str; 12] = [
        "case",
        "model",
        "arm",
        "n",
        "n_train",
        "seed",
        "train_E",
        "test_E",
        "E_D",
        "E_M",
        "error_reduction_train",
        "error_reduction_test",
    ];

    /// Fills the reduction columns from the matching baseline row.
    pub fn set_reductions(&mut self, baseline: &EvalReport) {
        self.error_reduction_train = Some(error_reduction(self.train_e, baseline.train_e));
        self.error_reduction_test = Some(error_reduction(self.test_e, baseline.test_e));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_predictor_on_ones() {
        let x = vec![0.0; 5];
        let y = vec![1.0; 45];
        let e = mse(|_| Ok(vec![0.0; 9]), &x, &y, 1, 9).unwrap();
        assert_eq!(e, 9.0);
    }

    #[test]
    fn perfect_predictor() {
        let x = vec![1.0, 2.0, 3.0];
        let e = mse(|v| Ok(vec![2.0 * v[0]]), &x, &[2.0, 4.0, 6.0], 1, 1).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn empty_and_mismatched_rejected() {
        assert!(mse(|_| Ok(vec![0.0]), &[], &[], 1, 1).is_err());
        assert!(mse(|_| Ok(vec![0.0]), &[1.0, 2.0], &[1.0], 1, 1).is_err());
        assert!(mse(|_| Ok(vec![0.0, 0.0]), &[1.0], &[1.0], 1, 1).is_err());
    }

    #[test]
    fn reduction_percent() {
        assert_eq!(error_reduction(1.0, 4.0), 75.0);
        assert_eq!(error_reduction(4.0, 4.0), 0.0);
    }
}
