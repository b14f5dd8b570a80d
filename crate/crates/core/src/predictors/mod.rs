//! Kernel regressors behind one fit/predict interface.

pub mod forest;
pub mod format;
pub mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
pub use forest::{Forest, ForestConfig};
pub use mlp::{Mlp, MlpConfig, TrainingHistory};

/// Borrowed row-major feature and label matrices.
#[derive(Clone, Copy, Debug)]
pub struct TrainingData<'a> {
    features: &'a [f64],
    labels: &'a [f64],
    input_dim: usize,
    output_dim: usize,
}

impl<'a> TrainingData<'a> {
    pub fn new(
        features: &'a [f64],
        labels: &'a [f64],
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(invalid!("feature and label dims must be positive"));
        }
        if features.is_empty() {
            return Err(invalid!("training set is empty"));
        }
        if features.len() % input_dim != 0 || labels.len() % output_dim != 0 {
            return Err(invalid!("data length is not a multiple of its dimension"));
        }
        if features.len() / input_dim != labels.len() / output_dim {
            return Err(invalid!(
                "{} feature rows but {} label rows",
                features.len() / input_dim,
                labels.len() / output_dim
            ));
        }
        if features.iter().chain(labels).any(|v| !v.is_finite()) {
            return Err(invalid!("training data contains non-finite values"));
        }
        Ok(Self {
            features,
            labels,
            input_dim,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn features(&self) -> &'a [f64] {
        self.features
    }

    pub fn labels(&self) -> &'a [f64] {
        self.labels
    }

    pub fn feature_row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label_row(&self, i: usize) -> &'a [f64] {
        &self.labels[i * self.output_dim..(i + 1) * self.output_dim]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Forest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp(MlpConfig),
    Forest(ForestConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Mlp(MlpConfig::default())
    }
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Mlp(_) => ModelKind::Mlp,
            ModelConfig::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Mlp(c) => c.validate(),
            ModelConfig::Forest(c) => c.validate(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::Mlp(m) => m.seed = seed,
            ModelConfig::Forest(f) => f.seed = seed,
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelModel {
    Mlp(Mlp),
    Forest(Forest),
}

impl KernelModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            KernelModel::Mlp(_) => ModelKind::Mlp,
            KernelModel::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            KernelModel::Mlp(m) => m.input_dim(),
            KernelModel::Forest(f) => f.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            KernelModel::Mlp(m) => m.output_dim(),
            KernelModel::Forest(f) => f.output_dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            KernelModel::Mlp(m) => m.predict(x),
            KernelModel::Forest(f) => f.predict(x),
        }
    }
}

/// A fitted model plus whatever the trainer recorded along the way.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: KernelModel,
    /// Present for MLPs only.
    pub history: Option<TrainingHistory>,
}

pub fn fit(data: &TrainingData<'_>, config: &ModelConfig) -> Result<Fitted> {
    match config {
        ModelConfig::Mlp(c) => {
            let (net, history) = mlp::train(data, c)?;
            Ok(Fitted {
                model: KernelModel::Mlp(net),
                history: Some(history),
            })
        }
        ModelConfig::Forest(c) => Ok(Fitted {
            model: KernelModel::Forest(forest::train(data, c)?),
            history: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_data_validation() {
        assert!(TrainingData::new(&[], &[], 1, 1).is_err());
        assert!(TrainingData::new(&[1.0, 2.0], &[1.0], 1, 1).is_err());
        assert!(TrainingData::new(&[f64::NAN], &[1.0], 1, 1).is_err());
        assert!(TrainingData::new(&[1.0, 2.0, 3.0], &[1.0], 2, 1).is_err());
        let d = TrainingData::new(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0], 2, 1).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.feature_row(1), &[3.0, 4.0]);
        assert_eq!(d.label_row(1), &[6.0]);
    }

    #[test]
    fn seed_override_keeps_kind() {
        let c = ModelConfig::Forest(ForestConfig::default()).with_seed(7);
        assert_eq!(c.kind(), ModelKind::Forest);
        assert!(matches!(c, ModelConfig::Forest(ForestConfig { seed: 7, .. })));
    }
}
