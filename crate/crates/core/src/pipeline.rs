//! Predictors over tensor tuples: the raw baseline and the standardize,
//! predict, restore pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cases::Case;
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::predictors::KernelModel;
use crate::standardize::{standardize_tuple, Frame};
use crate::{Tensor, Tuple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    /// Kernel trained and evaluated on raw inputs.
    #[serde(rename = "baseline")]
    Baseline,
    /// Kernel trained on standard positions, wrapped with standardize/restore.
    #[serde(rename = "roteqnet")]
    RotEqNet,
    /// Kernel trained and evaluated on standard positions only.
    #[serde(rename = "standard_only")]
    StandardOnly,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Baseline, Arm::RotEqNet, Arm::StandardOnly];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::RotEqNet => "roteqnet",
            Arm::StandardOnly => "standard_only",
        }
    }

    pub fn uses_standard_position(self) -> bool {
        self != Arm::Baseline
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| invalid!("unknown arm {s:?}"))
    }
}

/// Anything that maps an input tuple to a label tensor.
pub trait TuplePredictor {
    fn predict(&self, x: &Tuple) -> Result<Tensor>;
}

/// The case law itself; an exact predictor.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticLaw(pub Case);

impl TuplePredictor for AnalyticLaw {
    fn predict(&self, x: &Tuple) -> Result<Tensor> {
        self.0.label(x)
    }
}

fn to_label(values: Vec<f64>, order: usize) -> Result<Tensor> {
    Tensor::new(order, 3, values)
}

/// Kernel applied directly to the flattened raw tuple.
#[derive(Clone, Debug)]
pub struct RawPipeline {
    pub model: KernelModel,
    pub label_order: usize,
}

impl TuplePredictor for RawPipeline {
    fn predict(&self, x: &Tuple) -> Result<Tensor> {
        to_label(self.model.predict(&x.flatten())?, self.label_order)
    }
}

/// Standardize the input, predict in standard position, restore.
#[derive(Clone, Debug)]
pub struct EquivariantPipeline {
    pub model: KernelModel,
    pub label_order: usize,
}

impl EquivariantPipeline {
    /// Prediction for an input already in standard position with `frame`.
    pub fn predict_standardized(&self, xs: &[f64], frame: &Frame<f64>) -> Result<Tensor> {
        let ys = to_label(self.model.predict(xs)?, self.label_order)?;
        crate::standardize::restore_prediction(&ys, frame)
    }

    /// Kernel output in standard position, averaged over the frame's
    /// stabilizer exactly as `predict` does before restoring.
    pub fn predict_in_standard_position(&self, xs: &[f64], frame: &Frame<f64>) -> Result<Tensor> {
        let ys = to_label(self.model.predict(xs)?, self.label_order)?;
        let identity = Frame {
            restore: crate::Rot::identity(),
            ..*frame
        };
        crate::standardize::restore_prediction(&ys, &identity)
    }
}

impl TuplePredictor for EquivariantPipeline {
    fn predict(&self, x: &Tuple) -> Result<Tensor> {
        let s = standardize_tuple(x)?;
        self.predict_standardized(&s.xs.flatten(), &s.frame)
    }
}

/// A dataset mapped to standard position: features `xs`, labels rotated
/// into the same frame, and the per-sample frames.
#[derive(Clone, Debug)]
pub struct StandardizedSet {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub frames: Vec<Frame<f64>>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl StandardizedSet {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let n = ds.len();
        let mut features = Vec::with_capacity(n * ds.input_dim());
        let mut labels = Vec::with_capacity(n * ds.output_dim());
        let mut frames = Vec::with_capacity(n);
        for i in 0..n {
            let s = standardize_tuple(&ds.input(i)?)?;
            let ys = ds.label(i)?.rotate(&s.frame.restore.transpose())?;
            features.extend(s.xs.flatten());
            labels.extend_from_slice(ys.data());
            frames.push(s.frame);
        }
        Ok(Self {
            features,
            labels,
            frames,
            input_dim: ds.input_dim(),
            output_dim: ds.output_dim(),
        })
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label_row(&self, i: usize) -> &[f64] {
        &self.labels[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_dim);
        let mut y = Vec::with_capacity(idx.len() * self.output_dim);
        for &i in idx {
            x.extend_from_slice(self.feature_row(i));
            y.extend_from_slice(self.label_row(i));
        }
        (x, y)
    }

    pub fn degenerate_count(&self) -> usize {
        self.frames.iter().filter(|f| f.degenerate).count()
    }
}
