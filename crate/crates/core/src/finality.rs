//! Votes, deposit-weighted tallies, justification and finalization.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::chain::{epoch_of, ChainError, ChainView};
use crate::{BlockId, Real};

/// Validator identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValidatorId(pub u32);

/// Opaque authenticity token standing in for a cryptographic signature.
/// Forgery is out of scope: a token is valid iff it was derived from the
/// claimed signer and the scenario secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub signer: ValidatorId,
    pub token: u64,
}

/// Token derivation shared by signers and verifiers.
pub fn auth_token(validator: ValidatorId, secret: u64) -> u64 {
    (validator.0 as u64 ^ secret).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl Signature {
    pub fn sign(validator: ValidatorId, secret: u64) -> Self {
        Signature {
            signer: validator,
            token: auth_token(validator, secret),
        }
    }
}

/// The vote message `<validator, target, h(target), h(source), signature>`.
///
/// Heights are measured in checkpoints, not blocks. The source checkpoint
/// is not carried explicitly: it is the ancestor of the target at
/// `source_height` on the chain being voted on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub validator: ValidatorId,
    pub target: BlockId,
    pub target_height: u64,
    pub source_height: u64,
    pub signature: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidVoteReason {
    BadSignature,
    UnknownTarget,
    /// The target is not the checkpoint of the current epoch.
    WrongTargetEpoch,
    TargetNotCheckpoint,
    /// Claimed heights do not match the actual tree positions.
    HeightMismatch,
    SourceNotJustified,
}

/// Classification result of [`FinalityState::validate_vote`]. Valid votes
/// carry the resolved source checkpoint id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteValidity {
    Valid { source: BlockId },
    Invalid(InvalidVoteReason),
}

#[derive(Debug, Error, PartialEq)]
pub enum FinalityError {
    #[error("validator {0:?} already voted for this link")]
    DuplicateVote(ValidatorId),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Bookkeeping attached to a justified checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Justification {
    /// Total deposit at the epoch the checkpoint was justified, used by the
    /// fork-choice deposit filter.
    pub total_deposit: Real,
}

/// Justification/finalization bookkeeping for one chain view.
///
/// Genesis is both justified and finalized from initialization, serving as
/// the base case of the justification recursion. Flags are monotone: once
/// set they are never unset.
#[derive(Debug, Clone)]
pub struct FinalityState {
    genesis: BlockId,
    justified: HashMap<BlockId, Justification>,
    finalized: HashMap<BlockId, u64>,
    tallies: HashMap<(BlockId, BlockId), Real>,
    voters: HashSet<(ValidatorId, BlockId, BlockId)>,
    last_finalized_epoch: u64,
}

/// Supermajority predicate shared by the tally path and the analysis
/// recursions, so both sides follow the same arithmetic.
pub fn meets_threshold(tally: Real, total_deposit: Real, threshold: Real) -> bool {
    tally >= threshold * total_deposit
}

impl FinalityState {
    pub fn new(genesis: BlockId) -> Self {
        let mut justified = HashMap::new();
        justified.insert(genesis, Justification { total_deposit: 0.0 });
        let mut finalized = HashMap::new();
        finalized.insert(genesis, 0);
        FinalityState {
            genesis,
            justified,
            finalized,
            tallies: HashMap::new(),
            voters: HashSet::new(),
            last_finalized_epoch: 0,
        }
    }

    pub fn genesis_id(&self) -> BlockId {
        self.genesis
    }

    pub fn is_justified(&self, id: BlockId) -> bool {
        self.justified.contains_key(&id)
    }

    pub fn is_finalized(&self, id: BlockId) -> bool {
        self.finalized.contains_key(&id)
    }

    pub fn justification(&self, id: BlockId) -> Option<&Justification> {
        self.justified.get(&id)
    }

    pub fn justified_ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.justified.keys().copied()
    }

    pub fn finalized_ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.finalized.keys().copied()
    }

    pub fn tally(&self, source: BlockId, target: BlockId) -> Real {
        self.tallies.get(&(source, target)).copied().unwrap_or(0.0)
    }

    /// Epoch of the most recently finalized checkpoint.
    pub fn last_finalized_epoch(&self) -> u64 {
        self.last_finalized_epoch
    }

    /// Epochs since finalization at the given epoch.
    pub fn esf(&self, current_epoch: u64) -> u64 {
        current_epoch.saturating_sub(self.last_finalized_epoch)
    }

    /// Classifies a vote. Valid iff the signature token matches the claimed
    /// validator, the target is the checkpoint of the current epoch on the
    /// chain being extended, the claimed heights match the tree, and the
    /// resolved source is justified.
    pub fn validate_vote(
        &self,
        view: &ChainView,
        vote: &Vote,
        current_epoch: u64,
        secret: u64,
        epoch_length: u64,
    ) -> VoteValidity {
        use InvalidVoteReason::*;
        if vote.signature.signer != vote.validator
            || vote.signature.token != auth_token(vote.validator, secret)
        {
            return VoteValidity::Invalid(BadSignature);
        }
        let target_block = match view.block(vote.target) {
            Ok(b) => b,
            Err(_) => return VoteValidity::Invalid(UnknownTarget),
        };
        if !crate::chain::is_checkpoint(target_block.height, epoch_length) {
            return VoteValidity::Invalid(TargetNotCheckpoint);
        }
        if target_block.height != vote.target_height * epoch_length {
            return VoteValidity::Invalid(HeightMismatch);
        }
        if epoch_of(target_block.height, epoch_length) != current_epoch {
            return VoteValidity::Invalid(WrongTargetEpoch);
        }
        if vote.source_height >= vote.target_height {
            return VoteValidity::Invalid(HeightMismatch);
        }
        let source = match view.ancestor_at(vote.target, vote.source_height * epoch_length) {
            Ok(s) => s,
            Err(_) => return VoteValidity::Invalid(HeightMismatch),
        };
        if !self.is_justified(source) {
            return VoteValidity::Invalid(SourceNotJustified);
        }
        VoteValidity::Valid { source }
    }

    /// Accumulates a previously validated vote into the link tally, weighted
    /// by the voter's current deposit. Each validator counts at most once
    /// per link.
    pub fn record_vote(
        &mut self,
        validator: ValidatorId,
        source: BlockId,
        target: BlockId,
        deposit_weight: Real,
    ) -> Result<(), FinalityError> {
        if !self.voters.insert((validator, source, target)) {
            return Err(FinalityError::DuplicateVote(validator));
        }
        *self.tallies.entry((source, target)).or_insert(0.0) += deposit_weight;
        Ok(())
    }

    /// Marks `target` justified iff the link tally reaches the threshold,
    /// the source is justified, and the source is an ancestor of the target.
    /// Returns whether the target is justified afterwards.
    pub fn try_justify(
        &mut self,
        view: &ChainView,
        source: BlockId,
        target: BlockId,
        total_deposit: Real,
        threshold: Real,
    ) -> Result<bool, FinalityError> {
        if self.is_justified(target) {
            return Ok(true);
        }
        if !self.is_justified(source) {
            return Ok(false);
        }
        if !view.is_ancestor(source, target)? {
            return Ok(false);
        }
        if meets_threshold(self.tally(source, target), total_deposit, threshold) {
            self.justified.insert(target, Justification { total_deposit });
            return Ok(true);
        }
        Ok(false)
    }

    /// Marks `checkpoint` finalized iff it is justified and the checkpoint
    /// immediately following it on the same chain is also justified.
    /// Returns whether the checkpoint is finalized afterwards.
    pub fn try_finalize(
        &mut self,
        view: &ChainView,
        checkpoint: BlockId,
        epoch_length: u64,
        current_epoch: u64,
    ) -> Result<bool, FinalityError> {
        if self.is_finalized(checkpoint) {
            return Ok(true);
        }
        if !self.is_justified(checkpoint) {
            return Ok(false);
        }
        let height = view.height_of(checkpoint)?;
        let child_height = height + epoch_length;
        let direct_child_justified = self
            .justified
            .keys()
            .copied()
            .filter(|&t| view.height_of(t) == Ok(child_height))
            .any(|t| view.ancestor_at(t, height) == Ok(checkpoint));
        if direct_child_justified {
            let epoch = epoch_of(height, epoch_length);
            self.finalized.insert(checkpoint, epoch);
            self.last_finalized_epoch = self.last_finalized_epoch.max(epoch);
            let _ = current_epoch; // ESF is derived on demand via `esf()`.
            return Ok(true);
        }
        Ok(false)
    }

    /// Test/bootstrap helper: marks a checkpoint justified unconditionally.
    pub fn force_justify(&mut self, id: BlockId, total_deposit: Real) {
        self.justified.insert(id, Justification { total_deposit });
    }

    /// Test/bootstrap helper: marks a checkpoint finalized unconditionally.
    pub fn force_finalize(&mut self, id: BlockId, epoch: u64) {
        self.finalized.insert(id, epoch);
        self.last_finalized_epoch = self.last_finalized_epoch.max(epoch);
    }
}

/// True iff neither block is an ancestor of the other.
pub fn conflicting(view: &ChainView, a: BlockId, b: BlockId) -> Result<bool, ChainError> {
    Ok(!view.is_ancestor(a, b)? && !view.is_ancestor(b, a)?)
}
