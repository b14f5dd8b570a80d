//! The CLI verbs, as library functions returning what they printed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use eqreg_core::cases::{build_rotation_eval, Case};
use eqreg_core::dataset::Dataset;
use eqreg_core::eval::{rotation_data_error, rotation_model_error, EvalReport};
use eqreg_core::experiment::{evaluate_arm, fit_arm, run_group, GroupSpec};
use eqreg_core::pipeline::{Arm, EquivariantPipeline, RawPipeline, TuplePredictor};
use eqreg_core::predictors::{format, KernelModel, ModelKind};

use crate::config::{usage, RunConfig};
use crate::output::{self, FailureRow};

fn case_of(cfg: &RunConfig) -> Result<Case> {
    Case::with_mu(cfg.case, cfg.mu).map_err(|e| usage(e.to_string()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

/// Generates a dataset file and optionally its CSV export.
pub fn generate(cfg: &RunConfig, out: &Path, csv: Option<&Path>) -> Result<String> {
    let ds = case_of(cfg)?.generate(cfg.n, cfg.seed)?;
    ensure_parent(out)?;
    ds.save(out).with_context(|| format!("cannot write dataset {}", out.display()))?;
    if let Some(csv) = csv {
        ensure_parent(csv)?;
        let f = fs::File::create(csv).with_context(|| format!("cannot write {}", csv.display()))?;
        ds.write_csv(std::io::BufWriter::new(f))?;
    }
    Ok(format!(
        "{}: N={} d_in={} d_out={} train={} test={} -> {}",
        ds.case().kind,
        ds.len(),
        ds.input_dim(),
        ds.output_dim(),
        ds.train_indices().len(),
        ds.test_indices().len(),
        out.display()
    ))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("cannot load dataset {}", path.display()))
}

fn load_model(path: &Path) -> Result<KernelModel> {
    format::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

/// Fits `cfg.arm` on a dataset, saves the kernel, and appends the report
/// row to `<output_dir>/reports.csv`.
pub fn train(cfg: &RunConfig, dataset: &Path, model_out: &Path) -> Result<EvalReport> {
    let ds = load_dataset(dataset)?;
    let model_cfg = cfg.model_config(cfg.model);
    let fitted = fit_arm(cfg.arm, &ds, None, &model_cfg)?;
    ensure_parent(model_out)?;
    format::save(&fitted.model, model_out)
        .with_context(|| format!("cannot write model {}", model_out.display()))?;
    let evalset = build_rotation_eval(ds.case(), ds.seed(), cfg.rotation_count)?;
    let report = evaluate_arm(cfg.arm, &fitted.model, &ds, None, &evalset)?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    output::append(&cfg.output_dir.join(output::REPORTS), &[&report])?;
    Ok(report)
}

/// Evaluates a saved kernel under `cfg.arm` on a dataset.
pub fn eval(cfg: &RunConfig, dataset: &Path, model: &Path) -> Result<EvalReport> {
    let ds = load_dataset(dataset)?;
    let model = load_model(model)?;
    let evalset = build_rotation_eval(ds.case(), ds.seed(), cfg.rotation_count)?;
    Ok(evaluate_arm(cfg.arm, &model, &ds, None, &evalset)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivariance {
    pub e_d: f64,
    pub e_m: f64,
}

/// Rotation errors of a saved kernel wrapped as `cfg.arm` on a fresh
/// rotation set of `cfg.case`.
pub fn equivariance(cfg: &RunConfig, model: &Path) -> Result<Equivariance> {
    let model = load_model(model)?;
    let case = case_of(cfg)?;
    if model.input_dim() != case.input_dim() || model.output_dim() != case.output_dim() {
        return Err(usage(format!("model dims do not match case {}", case.kind)));
    }
    let set = build_rotation_eval(&case, cfg.seed, cfg.rotation_count)?;
    let pipe: Box<dyn TuplePredictor> = match cfg.arm {
        Arm::Baseline => Box::new(RawPipeline {
            model,
            label_order: case.label_order(),
        }),
        Arm::RotEqNet => Box::new(EquivariantPipeline {
            model,
            label_order: case.label_order(),
        }),
        Arm::StandardOnly => {
            return Err(usage("standard_only never sees raw frames; use baseline or roteqnet"))
        }
    };
    Ok(Equivariance {
        e_d: rotation_data_error(pipe.as_ref(), &set)?,
        e_m: rotation_model_error(pipe.as_ref(), &set)?,
    })
}

#[derive(Debug, Default)]
pub struct ReproduceSummary {
    pub run_dir: PathBuf,
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Group key: (case, model, n, seed).
type Key = (String, String, usize, u64);

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Mlp => "mlp",
        ModelKind::Forest => "forest",
    }
}

/// Sweeps the reproduce grid into `<output_dir>/run-<hash>/`. Groups whose
/// rows are already present are skipped, so an interrupted run resumes.
pub fn reproduce(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<ReproduceSummary> {
    cfg.validate()?;
    let hash = cfg.hash();
    let run_dir = cfg.output_dir.join(format!("run-{}", &hash[..12]));
    fs::create_dir_all(&run_dir).with_context(|| format!("cannot create {}", run_dir.display()))?;
    fs::write(run_dir.join("config.toml"), cfg.to_toml())?;

    let grid = &cfg.reproduce;
    let existing = output::read_reports(&run_dir.join(output::REPORTS))?;
    let done: BTreeSet<Key> = existing
        .iter()
        .map(|r| (r.case.name().to_string(), model_name(r.model).to_string(), r.n, r.seed))
        .filter(|k| {
            let arms: BTreeSet<Arm> = existing
                .iter()
                .filter(|r| (r.case.name(), model_name(r.model), r.n, r.seed) == (k.0.as_str(), k.1.as_str(), k.2, k.3))
                .map(|r| r.arm)
                .collect();
            grid.arms.iter().all(|a| arms.contains(a))
        })
        .collect();

    let mut summary = ReproduceSummary {
        run_dir: run_dir.clone(),
        ..ReproduceSummary::default()
    };
    for &case_kind in &grid.cases {
        for &model in &grid.models {
            for &n in &grid.n_values {
                for &seed in &grid.seeds {
                    let key = (case_kind.name().to_string(), model_name(model).to_string(), n, seed);
                    let label = format!("{} {} N={} seed={}", key.0, key.1, n, seed);
                    if done.contains(&key) {
                        summary.skipped += 1;
                        progress(&format!("skip {label} (already done)"));
                        continue;
                    }
                    progress(&format!("run  {label}"));
                    let spec = GroupSpec {
                        case: Case::with_mu(case_kind, cfg.mu).map_err(|e| usage(e.to_string()))?,
                        model: cfg.model_config(model),
                        n,
                        seed,
                        rotation_count: cfg.rotation_count,
                        arms: grid.arms.clone(),
                    };
                    match run_group(&spec) {
                        Ok(outcomes) => {
                            output::write_group(&run_dir, &outcomes)?;
                            summary.completed += 1;
                        }
                        Err(e) => {
                            progress(&format!("fail {label}: {e}"));
                            output::append(
                                &run_dir.join(output::FAILURES),
                                &[FailureRow {
                                    case: case_kind.name(),
                                    model: model_name(model),
                                    n,
                                    seed,
                                    error: e.to_string(),
                                }],
                            )?;
                            summary.failed += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(summary)
}
