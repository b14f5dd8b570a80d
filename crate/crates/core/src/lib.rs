//! Rotation-equivariant regression for symmetric tensors over ℝ³.
//!
//! Inputs are mapped to a rotation-invariant standard position, a kernel
//! predictor is trained and evaluated only there, and predictions are
//! rotated back into the observed frame. The resulting pipeline is
//! equivariant by construction.
//!
//! The tensor algebra ([`tensor`], [`linalg`], [`standardize`]) is generic
//! over [`Real`] (`f32`/`f64`); the learning and experiment layers work in
//! `f64`. Aliases for the common `f64` instantiations live at the root.

pub mod cases;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod pipeline;
pub mod predictors;
pub mod scalar;
pub mod standardize;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor = tensor::DenseTensor<f64>;
pub type Rot = tensor::Rotation<f64>;
pub type Tuple = tensor::TensorTuple<f64>;
pub type Sample = standardize::StandardizedSample<f64>;
pub type Tensor32 = tensor::DenseTensor<f32>;
pub type Rot32 = tensor::Rotation<f32>;
