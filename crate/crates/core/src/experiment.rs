//! Runs the three arms of one (case, kernel, N, seed) group.
//!
//! The equivariant and standard-only arms share a single kernel fitted on
//! standard positions; they differ only in how it is evaluated.

use std::time::Instant;

use crate::cases::{build_rotation_eval, Case, RotationEvalSet};
use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::eval::{mse, rotation_data_error, rotation_model_error, squared_error, EvalReport};
use crate::pipeline::{Arm, EquivariantPipeline, RawPipeline, StandardizedSet};
use crate::predictors::{fit, Fitted, KernelModel, ModelConfig, TrainingData, TrainingHistory};

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub case: Case,
    pub model: ModelConfig,
    pub n: usize,
    pub seed: u64,
    pub rotation_count: usize,
    pub arms: Vec<Arm>,
}

#[derive(Clone, Debug)]
pub struct ArmOutcome {
    pub report: EvalReport,
    /// Seconds spent fitting plus evaluating this arm; a fit shared by two
    /// arms is charged to the first.
    pub wall_time_s: f64,
    pub history: Option<TrainingHistory>,
    pub model: KernelModel,
}

/// Fits the kernel an arm needs on the training rows. Standard-position
/// arms use `standardized`, computing it when absent.
pub fn fit_arm(
    arm: Arm,
    ds: &Dataset,
    standardized: Option<&StandardizedSet>,
    config: &ModelConfig,
) -> Result<Fitted> {
    let train = ds.train_indices();
    let owned;
    let (x, y) = if arm.uses_standard_position() {
        let set = match standardized {
            Some(s) => s,
            None => {
                owned = StandardizedSet::from_dataset(ds)?;
                &owned
            }
        };
        set.gather(train)
    } else {
        ds.gather(train)
    };
    fit(&TrainingData::new(&x, &y, ds.input_dim(), ds.output_dim())?, config)
}

/// Error of the equivariant pipeline on dataset rows `idx`, reusing the
/// frames already computed for `set`.
fn pipeline_error(pipe: &EquivariantPipeline, ds: &Dataset, set: &StandardizedSet, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let pred = pipe.predict_standardized(set.feature_row(i), &set.frames[i])?;
        total += squared_error(pred.data(), ds.label_row(i));
    }
    Ok(total / idx.len() as f64)
}

fn standard_error(pipe: &EquivariantPipeline, set: &StandardizedSet, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let pred = pipe.predict_in_standard_position(set.feature_row(i), &set.frames[i])?;
        total += squared_error(pred.data(), set.label_row(i));
    }
    Ok(total / idx.len() as f64)
}

/// Train/test errors of a fitted kernel under `arm`, plus the rotation
/// errors for arms that act on raw frames.
pub fn evaluate_arm(
    arm: Arm,
    model: &KernelModel,
    ds: &Dataset,
    standardized: Option<&StandardizedSet>,
    evalset: &RotationEvalSet,
) -> Result<EvalReport> {
    if model.input_dim() != ds.input_dim() || model.output_dim() != ds.output_dim() {
        return Err(invalid!(
            "model maps {} -> {}, dataset has {} -> {}",
            model.input_dim(),
            model.output_dim(),
            ds.input_dim(),
            ds.output_dim()
        ));
    }
    let (train, test) = (ds.train_indices(), ds.test_indices());
    if test.is_empty() {
        return Err(invalid!("dataset has no test samples"));
    }
    let (d_in, d_out) = (ds.input_dim(), ds.output_dim());
    let order = ds.case().label_order();
    let (train_e, test_e, e_d, e_m) = match arm {
        Arm::Baseline => {
            let pipe = RawPipeline {
                model: model.clone(),
                label_order: order,
            };
            let predict = |v: &[f64]| pipe.model.predict(v);
            let (x, y) = ds.gather(train);
            let (xt, yt) = ds.gather(test);
            (
                mse(predict, &x, &y, d_in, d_out)?,
                mse(predict, &xt, &yt, d_in, d_out)?,
                Some(rotation_data_error(&pipe, evalset)?),
                Some(rotation_model_error(&pipe, evalset)?),
            )
        }
        Arm::RotEqNet | Arm::StandardOnly => {
            let owned;
            let set = match standardized {
                Some(s) => s,
                None => {
                    owned = StandardizedSet::from_dataset(ds)?;
                    &owned
                }
            };
            let pipe = EquivariantPipeline {
                model: model.clone(),
                label_order: order,
            };
            if arm == Arm::RotEqNet {
                (
                    pipeline_error(&pipe, ds, set, train)?,
                    pipeline_error(&pipe, ds, set, test)?,
                    Some(rotation_data_error(&pipe, evalset)?),
                    Some(rotation_model_error(&pipe, evalset)?),
                )
            } else {
                (
                    standard_error(&pipe, set, train)?,
                    standard_error(&pipe, set, test)?,
                    None,
                    None,
                )
            }
        }
    };
    Ok(EvalReport {
        case: ds.case().kind,
        model: model.kind(),
        arm,
        n: ds.len(),
        n_train: train.len(),
        seed: ds.seed(),
        train_e,
        test_e,
        e_d,
        e_m,
        error_reduction_train: None,
        error_reduction_test: None,
    })
}

/// Runs the requested arms on a freshly generated dataset.
pub fn run_group(spec: &GroupSpec) -> Result<Vec<ArmOutcome>> {
    if spec.arms.is_empty() {
        return Err(invalid!("no arms requested"));
    }
    spec.model.validate()?;
    let ds = spec.case.generate(spec.n, spec.seed)?;
    if ds.test_indices().is_empty() {
        return Err(invalid!("N = {} leaves no test samples", spec.n));
    }
    let evalset = build_rotation_eval(&spec.case, spec.seed, spec.rotation_count)?;
    run_group_on(spec, &ds, &evalset)
}

pub fn run_group_on(spec: &GroupSpec, ds: &Dataset, evalset: &RotationEvalSet) -> Result<Vec<ArmOutcome>> {
    let config = spec.model.with_seed(spec.seed);
    let mut out = Vec::new();

    if spec.arms.contains(&Arm::Baseline) {
        let start = Instant::now();
        let fitted = fit_arm(Arm::Baseline, ds, None, &config)?;
        let report = evaluate_arm(Arm::Baseline, &fitted.model, ds, None, evalset)?;
        out.push(ArmOutcome {
            report,
            wall_time_s: start.elapsed().as_secs_f64(),
            history: fitted.history,
            model: fitted.model,
        });
    }

    if spec.arms.iter().any(|a| a.uses_standard_position()) {
        let mut start = Instant::now();
        let set = StandardizedSet::from_dataset(ds)?;
        let fitted = fit_arm(Arm::RotEqNet, ds, Some(&set), &config)?;
        for arm in [Arm::RotEqNet, Arm::StandardOnly] {
            if !spec.arms.contains(&arm) {
                continue;
            }
            let report = evaluate_arm(arm, &fitted.model, ds, Some(&set), evalset)?;
            out.push(ArmOutcome {
                report,
                wall_time_s: start.elapsed().as_secs_f64(),
                history: fitted.history.clone(),
                model: fitted.model.clone(),
            });
            start = Instant::now();
        }
    }

    if let Some(base) = out.iter().find(|o| o.report.arm == Arm::Baseline).map(|o| o.report.clone()) {
        for o in out.iter_mut().filter(|o| o.report.arm != Arm::Baseline) {
            o.report.set_reductions(&base);
        }
    }
    Ok(out)
}
