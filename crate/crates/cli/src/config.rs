//! Pipeline configuration: JSON schema, defaults and content hash.

use std::path::{Path, PathBuf};

use eth_core::model_ops::{builtin_tensor_op_by_name, ModelSpec, TensorOpSpec};
use eth_core::spin_algebra::HalfInt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Chain length used when nothing else is specified; the largest size that
/// runs comfortably on a laptop.
pub const DESK_QUBITS: usize = 14;
/// Chain length of the reference study.
pub const REFERENCE_QUBITS: usize = 18;

/// A builtin name (`T10`, `T11`, `T20`, `T22`) or a full operator definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorEntry {
    Builtin(String),
    Custom(TensorOpSpec),
}

impl OperatorEntry {
    pub fn resolve(&self, n_qubits: usize) -> Result<TensorOpSpec, CliError> {
        match self {
            OperatorEntry::Builtin(name) => builtin_tensor_op_by_name(name, n_qubits).map_err(|e| CliError::Config(format!("operator {name:?}: {e}"))),
            OperatorEntry::Custom(op) => {
                if op.n_qubits() != n_qubits {
                    return Err(CliError::Config(format!(
                        "custom operator {:?} is defined on {} qubits but the model has {n_qubits}",
                        op.label,
                        op.n_qubits()
                    )));
                }
                if !op.rank.is_integer() || op.rank.twice() < 0 {
                    return Err(CliError::Config(format!("custom operator {:?}: rank must be a non-negative integer, got {}", op.label, op.rank)));
                }
                if !op.rank.admits_projection(op.component) {
                    return Err(CliError::Config(format!("custom operator {:?}: component {} outside rank {}", op.label, op.component, op.rank)));
                }
                Ok(op.clone())
            }
        }
    }
}

/// Energy windows, all in units of `E/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Narrow window for element statistics and the variance ratio.
    pub width: f64,
    /// Window enclosing the narrow windows of the variance sweep.
    pub encompassing_width: f64,
    pub stride: f64,
    /// Bin width used to locate a sector's DOS peak.
    pub peak_width: f64,
    /// Bin width of the `dos` table.
    pub dos_width: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { width: 0.1, encompassing_width: 0.5, stride: 0.05, peak_width: 0.5, dos_width: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub gap_ratio_bins: usize,
    /// Element histograms; Sturges' rule when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_bins: Option<usize>,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig { gap_ratio_bins: 25, element_bins: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FScanConfig {
    /// Offsets of the mean-energy windows from each row sector's DOS peak.
    pub energy_offsets: Vec<f64>,
    pub omega_bin_width: f64,
    pub omega_max: f64,
    pub min_count: usize,
}

impl Default for FScanConfig {
    fn default() -> Self {
        FScanConfig { energy_offsets: vec![0.0], omega_bin_width: 0.5, omega_max: 12.0, min_count: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceConfig {
    pub min_diag: usize,
    pub min_off: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig { min_diag: 30, min_off: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSpec,
    pub operators: Vec<OperatorEntry>,
    /// Spin sectors analysed by `gapstats`, `hist` and `varratio`.
    pub spins: Vec<HalfInt>,
    pub windows: WindowConfig,
    pub histogram: HistogramConfig,
    pub fscan: FScanConfig,
    pub variance: VarianceConfig,
    /// Refuse runs whose estimated peak memory exceeds this.
    pub memory_limit_gb: f64,
    /// Seed for synthetic random-matrix controls.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model: ModelSpec::open(DESK_QUBITS),
            operators: vec![OperatorEntry::Builtin("T10".into())],
            spins: vec![HalfInt::from_int(1), HalfInt::from_int(2), HalfInt::from_int(3)],
            windows: WindowConfig::default(),
            histogram: HistogramConfig::default(),
            fscan: FScanConfig::default(),
            variance: VarianceConfig::default(),
            memory_limit_gb: 8.0,
            seed: 0,
            cache_dir: Some(PathBuf::from("eth-lab-cache")),
            out_dir: PathBuf::from("eth-lab-out"),
            threads: None,
        }
    }
}

impl PipelineConfig {
    /// Defaults with the chain length of the reference study.
    pub fn reference() -> Self {
        PipelineConfig { model: ModelSpec::open(REFERENCE_QUBITS), ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.model.n_qubits < 2 {
            return Err(CliError::Config(format!("N = {} is too small; the pipeline needs N >= 2", self.model.n_qubits)));
        }
        self.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        let w = &self.windows;
        for (name, v) in [
            ("windows.width", w.width),
            ("windows.encompassing_width", w.encompassing_width),
            ("windows.stride", w.stride),
            ("windows.peak_width", w.peak_width),
            ("windows.dos_width", w.dos_width),
            ("fscan.omega_bin_width", self.fscan.omega_bin_width),
            ("fscan.omega_max", self.fscan.omega_max),
            ("memory_limit_gb", self.memory_limit_gb),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if w.width > w.encompassing_width {
            return Err(CliError::Config("windows.width exceeds windows.encompassing_width".into()));
        }
        if self.histogram.gap_ratio_bins == 0 || self.histogram.element_bins == Some(0) {
            return Err(CliError::Config("histograms need at least one bin".into()));
        }
        if self.operators.is_empty() {
            return Err(CliError::Config("no operators configured".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if self.fscan.energy_offsets.is_empty() {
            return Err(CliError::Config("fscan.energy_offsets is empty".into()));
        }
        for op in &self.operators {
            op.resolve(self.model.n_qubits)?;
        }
        Ok(())
    }

    pub fn operators(&self) -> Result<Vec<TensorOpSpec>, CliError> {
        self.operators.iter().map(|o| o.resolve(self.model.n_qubits)).collect()
    }

    /// Everything that affects results, as JSON with sorted keys; paths and
    /// the thread count are left out.
    pub fn canonical(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            for key in ["cache_dir", "out_dir", "threads"] {
                map.remove(key);
            }
        }
        value
    }

    /// SHA-256 of [`Self::canonical`].
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().to_string().as_bytes()))
    }
}
