//! Experiment manifest: a JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use neqc_core::qstate::MAX_QUBITS;
use neqc_core::{block_count, ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::Invalid;

/// Inclusive qubit range, written `A..B` or `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QubitRange {
    pub from: usize,
    pub to: usize,
}

impl QubitRange {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.from..=self.to
    }
}

impl FromStr for QubitRange {
    type Err = Invalid;

    fn from_str(s: &str) -> Result<Self, Invalid> {
        let parse = |t: &str| {
            t.trim().parse::<usize>().map_err(|_| Invalid(format!("bad qubit count {t:?} in {s:?}")))
        };
        let (from, to) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if from > to {
            return Err(Invalid(format!("empty qubit range {s:?}")));
        }
        Ok(Self { from, to })
    }
}

impl TryFrom<String> for QubitRange {
    type Error = Invalid;

    fn try_from(s: String) -> Result<Self, Invalid> {
        s.parse()
    }
}

impl From<QubitRange> for String {
    fn from(r: QubitRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for QubitRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}

/// Training hyperparameters; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub qubits: QubitRange,
    pub models: Vec<ModelKind>,
    pub runs: usize,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            qubits: QubitRange { from: 3, to: 8 },
            models: ModelKind::ALL.to_vec(),
            runs: 10,
            hyperparameters: Hyperparameters::default(),
            out: PathBuf::from("results"),
            seed: 0,
        }
    }
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| Invalid(format!("manifest {}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        if self.qubits.from < 2 || self.qubits.to > MAX_QUBITS {
            return Err(Invalid(format!("qubit range {} must lie within 2..{MAX_QUBITS}", self.qubits)));
        }
        if self.runs == 0 {
            return Err(Invalid("runs must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Invalid("no models selected".into()));
        }
        for n in self.qubits.iter() {
            self.train_config(n)?;
        }
        Ok(())
    }

    /// Training template for `n` qubits (model and seed are filled per run).
    pub fn train_config(&self, n: usize) -> Result<TrainConfig, Invalid> {
        let invalid = |e: neqc_core::Error| Invalid(e.to_string());
        let h = &self.hyperparameters;
        let base = TrainConfig::new(n, ModelKind::Sqc).map_err(invalid)?;
        let cfg = TrainConfig {
            n_blocks: h.n_blocks.unwrap_or(block_count(n).map_err(invalid)?),
            learning_rate: h.learning_rate.unwrap_or(base.learning_rate),
            momentum: h.momentum.unwrap_or(base.momentum),
            loss_target: h.loss_target.unwrap_or(base.loss_target),
            plateau_window: h.plateau_window.unwrap_or(base.plateau_window),
            plateau_delta: h.plateau_delta.unwrap_or(base.plateau_delta),
            max_iterations: h.max_iterations.unwrap_or(base.max_iterations),
            output_scale: h.output_scale.unwrap_or(base.output_scale),
            ..base
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }
}
