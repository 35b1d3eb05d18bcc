use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, ExperimentError, StreamOrder, SyntheticSpec};
use crate::kernels::KernelSpec;
use crate::skeptic::PolicyKind;

pub const CONFIG_VERSION: u32 = 1;

/// Where the labeled data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<String>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSpec::default())
    }
}

impl DataSource {
    /// Loads the dataset. Relative CSV paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Dataset, ExperimentError> {
        match self {
            DataSource::Synthetic(spec) => super::generate_synthetic(spec),
            DataSource::Csv { path, label_column } => {
                let path = match base {
                    Some(base) if path.is_relative() => base.join(path),
                    _ => path.clone(),
                };
                Dataset::from_csv_path(&path, label_column.as_deref())
            }
        }
    }
}

/// Everything that determines an experiment run.
///
/// TOML form (all keys optional, defaults shown):
///
/// ```toml
/// version = 1
/// ordering = "random_shuffle"   # or "sequential_clusters"
/// eta = 0.1
/// clean_contradictions = false
/// policies = ["isgp", "gp_never", "gp_always"]
/// folds = 10
/// rho = 1e-8
/// seeds = [0]
/// eval_stride = 1
/// record_timing = false
///
/// [kernel]
/// type = "squared_exponential"
/// length_scale = 2.0
///
/// [data]
/// source = "synthetic"
/// n_classes = 6
/// n_instances = 100
/// dim = 2
/// class_std = 1.5
/// seed = 0
/// centers = { kind = "circle", radius = 6.0 }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub data: DataSource,
    pub ordering: StreamOrder,
    /// Annotator noise rate η.
    pub eta: f64,
    /// Answer contradiction queries without noise.
    pub clean_contradictions: bool,
    pub policies: Vec<PolicyKind>,
    pub folds: usize,
    pub kernel: KernelSpec,
    pub rho: f64,
    /// One full cross-validation per seed.
    pub seeds: Vec<u64>,
    /// Evaluate held-out F1 every this many rounds (and at the last round).
    pub eval_stride: usize,
    /// Measure per-round wall time. Off by default so result tables are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            data: DataSource::default(),
            ordering: StreamOrder::RandomShuffle,
            eta: 0.1,
            clean_contradictions: false,
            policies: PolicyKind::ALL.to_vec(),
            folds: 10,
            kernel: KernelSpec::default(),
            rho: 1e-8,
            seeds: vec![0],
            eval_stride: 1,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.version));
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.eval_stride == 0 {
            return bad("eval_stride must be positive".into());
        }
        if !(0.0..0.5).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 0.5), got {}", self.eta));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad(format!("rho must be non-negative, got {}", self.rho));
        }
        self.kernel.validate()?;
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}
