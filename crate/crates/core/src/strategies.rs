//! Validator behavior policies: honest, offline, the finalization-delaying
//! adversary, and cross-branch equivocators.

use serde::{Deserialize, Serialize};

use crate::finality::{Signature, ValidatorId, Vote};
use crate::{BlockId, Real};

/// Branch index inside a simulation (0 before any partition).
pub type BranchId = u32;

/// Behavior assigned to one validator for a whole scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// One valid vote per epoch on the branch's fork-choice head chain.
    Honest,
    /// Honest until `from_epoch`, then silent forever.
    Offline { from_epoch: u64 },
    /// Member of the coordinated adversary that keeps total participation
    /// marginally below the finality threshold each epoch.
    WorstCase,
    /// Votes on every listed branch each epoch.
    Equivocator { branches: Vec<BranchId> },
    /// Honest, but only on the given branch.
    PartitionHonest { branch: BranchId },
}

/// Adversary participation fraction that keeps total participation at the
/// feasibility boundary: `(2/3 - alpha) / (1 - alpha)`, clamped at zero
/// once the honest share alone exceeds two thirds.
pub fn worst_case_delta(alpha: Real) -> Real {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    ((2.0 / 3.0 - alpha) / (1.0 - alpha)).max(0.0)
}

/// Per-branch vote skeleton prepared by the engine from the branch's
/// fork-choice head: the current-epoch checkpoint and the last justified
/// checkpoint on that chain, both in checkpoint heights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteTemplate {
    pub branch: BranchId,
    pub target: BlockId,
    pub target_height: u64,
    pub source_height: u64,
}

/// Immutable per-epoch context handed to the decision functions.
#[derive(Debug, Clone, Copy)]
pub struct EpochSnapshot<'a> {
    pub epoch: u64,
    /// One template per live branch.
    pub templates: &'a [VoteTemplate],
    /// The branch this validator is assigned to.
    pub home: BranchId,
    /// Whether the worst-case coordinator selected this validator to vote
    /// this epoch.
    pub wc_selected: bool,
    pub secret: u64,
}

fn cast(validator: ValidatorId, template: &VoteTemplate, secret: u64) -> Vote {
    Vote {
        validator,
        target: template.target,
        target_height: template.target_height,
        source_height: template.source_height,
        signature: Signature::sign(validator, secret),
    }
}

/// Votes a validator emits this epoch under its strategy. Callers must
/// ensure the validator is active and unslashed.
pub fn decide_votes(
    strategy: &Strategy,
    validator: ValidatorId,
    snap: &EpochSnapshot,
) -> Vec<(BranchId, Vote)> {
    let on_branch = |b: BranchId| snap.templates.iter().find(|t| t.branch == b);
    match strategy {
        Strategy::Honest => on_branch(snap.home)
            .map(|t| vec![(t.branch, cast(validator, t, snap.secret))])
            .unwrap_or_default(),
        Strategy::Offline { from_epoch } => {
            if snap.epoch < *from_epoch {
                decide_votes(&Strategy::Honest, validator, snap)
            } else {
                Vec::new()
            }
        }
        Strategy::WorstCase => {
            if snap.wc_selected {
                decide_votes(&Strategy::Honest, validator, snap)
            } else {
                Vec::new()
            }
        }
        Strategy::Equivocator { branches } => branches
            .iter()
            .filter_map(|&b| on_branch(b))
            .map(|t| (t.branch, cast(validator, t, snap.secret)))
            .collect(),
        Strategy::PartitionHonest { branch } => on_branch(*branch)
            .map(|t| vec![(t.branch, cast(validator, t, snap.secret))])
            .unwrap_or_default(),
    }
}
