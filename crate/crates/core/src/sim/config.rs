//! TOML scenario schema and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strategies::{BranchId, Strategy};
use crate::{ProtocolParams, Real};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Block proposal timing model. Both use the same per-branch mean interval
/// `mean_block_seconds / mining_share`; the stochastic model draws
/// exponential intervals from the seeded generator instead of using the
/// mean directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProposalModel {
    Deterministic {
        #[serde(default = "default_block_seconds")]
        mean_block_seconds: Real,
    },
    Stochastic {
        #[serde(default = "default_block_seconds")]
        mean_block_seconds: Real,
    },
}

fn default_block_seconds() -> Real {
    14.0
}

impl Default for ProposalModel {
    fn default() -> Self {
        ProposalModel::Deterministic {
            mean_block_seconds: default_block_seconds(),
        }
    }
}

impl ProposalModel {
    pub fn mean_block_seconds(&self) -> Real {
        match *self {
            ProposalModel::Deterministic { mean_block_seconds }
            | ProposalModel::Stochastic { mean_block_seconds } => mean_block_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    pub id: u32,
    pub deposit: Real,
    pub strategy: Strategy,
}

/// One side of a network partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub branch: BranchId,
    pub mining_share: Real,
}

/// A network partition active over `[start_epoch, end_epoch)`. Branch 0 is
/// the continuation of the pre-partition chain; the other sides fork off
/// its head. Without `end_epoch` the partition never heals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub start_epoch: u64,
    #[serde(default)]
    pub end_epoch: Option<u64>,
    pub branches: Vec<BranchConfig>,
}

/// A full simulation scenario, usually deserialized from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub max_epochs: u64,
    /// Stop as soon as a checkpoint is finalized after the fault epoch.
    #[serde(default)]
    pub stop_on_recovery: bool,
    /// Epoch of the modeled fault. Defaults to the earliest offline epoch
    /// or the partition start, whichever is defined.
    #[serde(default)]
    pub fault_epoch: Option<u64>,
    #[serde(default)]
    pub params: ProtocolParams,
    #[serde(default)]
    pub proposal: ProposalModel,
    pub validators: Vec<ValidatorConfig>,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_epochs == 0 {
            return Err(ConfigError::Invalid("max_epochs must be >= 1".into()));
        }
        if !(self.proposal.mean_block_seconds() > 0.0) {
            return Err(ConfigError::Invalid(
                "mean_block_seconds must be positive".into(),
            ));
        }
        if self.validators.is_empty() {
            return Err(ConfigError::Invalid("at least one validator".into()));
        }
        let mut ids: Vec<u32> = self.validators.iter().map(|v| v.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.validators.len() {
            return Err(ConfigError::Invalid("duplicate validator id".into()));
        }
        for v in &self.validators {
            if !(v.deposit > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "validator {} deposit must be positive",
                    v.id
                )));
            }
        }
        if let Some(p) = &self.partition {
            if p.start_epoch < 1 {
                return Err(ConfigError::Invalid("partition cannot start at epoch 0".into()));
            }
            if let Some(end) = p.end_epoch {
                if end <= p.start_epoch {
                    return Err(ConfigError::Invalid(
                        "partition must end after it starts".into(),
                    ));
                }
            }
            if p.branches.len() < 2 {
                return Err(ConfigError::Invalid(
                    "a partition needs at least two branches".into(),
                ));
            }
            let mut bs: Vec<BranchId> = p.branches.iter().map(|b| b.branch).collect();
            bs.sort_unstable();
            bs.dedup();
            if bs.len() != p.branches.len() {
                return Err(ConfigError::Invalid("duplicate branch id".into()));
            }
            if !bs.contains(&0) {
                return Err(ConfigError::Invalid(
                    "branch 0 must be one of the partition sides".into(),
                ));
            }
            let total: Real = p.branches.iter().map(|b| b.mining_share).sum();
            if p.branches.iter().any(|b| !(b.mining_share > 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(ConfigError::Invalid(
                    "mining shares must be positive and sum to 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// The fault epoch used for recovery reporting.
    pub fn effective_fault_epoch(&self) -> Option<u64> {
        if self.fault_epoch.is_some() {
            return self.fault_epoch;
        }
        let offline = self
            .validators
            .iter()
            .filter_map(|v| match v.strategy {
                Strategy::Offline { from_epoch } => Some(from_epoch),
                _ => None,
            })
            .min();
        let partition = self.partition.as_ref().map(|p| p.start_epoch);
        match (offline, partition) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}
