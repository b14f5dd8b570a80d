//! Run configuration: a versioned TOML file with every default pre-filled.

use std::fmt;
use std::path::{Path, PathBuf};

use eqreg_core::cases::{CaseKind, DEFAULT_ROTATION_COUNT};
use eqreg_core::pipeline::Arm;
use eqreg_core::predictors::{ForestConfig, MlpConfig, ModelConfig, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Bad input from the user; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Full,
}

/// Grid swept by `reproduce`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceConfig {
    pub cases: Vec<CaseKind>,
    pub models: Vec<ModelKind>,
    pub arms: Vec<Arm>,
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl ReproduceConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => Self {
                cases: CaseKind::ALL.to_vec(),
                models: vec![ModelKind::Mlp],
                arms: Arm::ALL.to_vec(),
                n_values: vec![2_000, 10_000],
                seeds: vec![0],
            },
            Preset::Full => Self {
                cases: CaseKind::ALL.to_vec(),
                models: vec![ModelKind::Mlp, ModelKind::Forest],
                arms: Arm::ALL.to_vec(),
                n_values: (1..=10).map(|k| k * 10_000).collect(),
                seeds: vec![0],
            },
        }
    }
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub case: CaseKind,
    pub model: ModelKind,
    pub arm: Arm,
    pub n: usize,
    pub seed: u64,
    pub mu: f64,
    pub rotation_count: usize,
    pub output_dir: PathBuf,
    /// Kernel settings; their `seed` fields are replaced by the run seed.
    pub mlp: MlpConfig,
    pub forest: ForestConfig,
    pub reproduce: ReproduceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            case: CaseKind::Newtonian,
            model: ModelKind::Mlp,
            arm: Arm::RotEqNet,
            n: 10_000,
            seed: 0,
            mu: 1.0,
            rotation_count: DEFAULT_ROTATION_COUNT,
            output_dir: PathBuf::from("results"),
            mlp: MlpConfig::default(),
            forest: ForestConfig::default(),
            reproduce: ReproduceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n == 0 {
            return Err(usage("n must be >= 1"));
        }
        if self.rotation_count == 0 {
            return Err(usage("rotation_count must be >= 1"));
        }
        if !self.mu.is_finite() {
            return Err(usage("mu must be finite"));
        }
        self.mlp.validate().map_err(|e| usage(e.to_string()))?;
        self.forest.validate().map_err(|e| usage(e.to_string()))?;
        let r = &self.reproduce;
        if r.cases.is_empty() || r.models.is_empty() || r.arms.is_empty() || r.seeds.is_empty() {
            return Err(usage("reproduce grid has an empty axis"));
        }
        if r.n_values.iter().any(|&n| n < 2) || r.n_values.is_empty() {
            return Err(usage("reproduce n_values must be non-empty and each >= 2"));
        }
        Ok(())
    }

    pub fn model_config(&self, kind: ModelKind) -> ModelConfig {
        let cfg = match kind {
            ModelKind::Mlp => ModelConfig::Mlp(self.mlp.clone()),
            ModelKind::Forest => ModelConfig::Forest(self.forest.clone()),
        };
        cfg.with_seed(self.seed)
    }

    /// SHA-256 of the canonical JSON form (keys sorted, output dir excluded,
    /// so moving a run does not change its identity).
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("json serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
