//! Block-tree model: blocks, parent links, chains, heights, epochs,
//! checkpoints, and the justification-aware fork-choice rule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finality::FinalityState;
use crate::Real;

/// Sequential block identifier assigned by the simulator.
pub type BlockId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("unknown parent block {0}")]
    UnknownParent(BlockId),
    #[error("duplicate block id {0}")]
    DuplicateId(BlockId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {id}: height {height} does not extend parent height {parent_height}")]
    HeightMismatch {
        id: BlockId,
        height: u64,
        parent_height: u64,
    },
    #[error("argument out of domain: {0}")]
    DomainError(String),
}

/// A node in the block tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    /// Parent block; `None` only for genesis.
    pub parent: Option<BlockId>,
    pub height: u64,
    pub proposer: Option<u32>,
    /// Logical arrival time in simulation ticks, used for tie-breaking.
    pub seen_at: u64,
}

impl Block {
    pub fn genesis(id: BlockId) -> Self {
        Block {
            id,
            parent: None,
            height: 0,
            proposer: None,
            seen_at: 0,
        }
    }

    pub fn new(id: BlockId, parent: BlockId, height: u64, seen_at: u64) -> Self {
        Block {
            id,
            parent: Some(parent),
            height,
            proposer: None,
            seen_at,
        }
    }
}

/// Protocol parameters.
///
/// Defaults follow the benchmark parametrisation: epoch length 50,
/// base interest factor 7e-3, base penalty factor 2e-7, total-deposit
/// dependence exponent 1/2 and a 2/3 finality threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Blocks per epoch, `l`.
    pub epoch_length: u64,
    /// Base interest factor, `gamma`.
    pub gamma: Real,
    /// Base penalty factor, `beta`.
    pub beta: Real,
    /// Total-deposit dependence exponent, `p`.
    pub p: Real,
    /// Stake fraction required for justification.
    pub finality_threshold: Real,
    /// Minimum total deposit for a justified epoch to count in fork choice.
    pub min_fork_choice_deposit: Real,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            epoch_length: 50,
            gamma: 7e-3,
            beta: 2e-7,
            p: 0.5,
            finality_threshold: 2.0 / 3.0,
            min_fork_choice_deposit: 1.0,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.epoch_length < 1 {
            return Err(ChainError::DomainError("epoch_length must be >= 1".into()));
        }
        if !(self.gamma > 0.0) || !(self.beta > 0.0) || !(self.p > 0.0) {
            return Err(ChainError::DomainError(
                "gamma, beta and p must be positive".into(),
            ));
        }
        if !(self.finality_threshold > 0.5 && self.finality_threshold <= 1.0) {
            return Err(ChainError::DomainError(
                "finality_threshold must lie in (1/2, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One observer's monotonically growing set of known blocks.
///
/// Blocks are never removed and every non-genesis block's parent is present
/// at insertion time, so height/parent consistency holds for every
/// reachable view state.
#[derive(Debug, Clone, Default)]
pub struct ChainView {
    blocks: HashMap<BlockId, Block>,
    children: HashMap<BlockId, Vec<BlockId>>,
    genesis: Option<BlockId>,
    /// Arrival order, used for first-seen tie-breaking.
    seen_order: Vec<BlockId>,
    /// Binary-lifting table: `skips[b][k]` is the `2^k`-th ancestor of `b`,
    /// kept so ancestor queries stay logarithmic on long chains.
    skips: HashMap<BlockId, Vec<BlockId>>,
}

impl ChainView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn genesis(&self) -> Option<BlockId> {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn block(&self, id: BlockId) -> Result<&Block, ChainError> {
        self.blocks.get(&id).ok_or(ChainError::UnknownBlock(id))
    }

    pub fn height_of(&self, id: BlockId) -> Result<u64, ChainError> {
        Ok(self.block(id)?.height)
    }

    /// Arrival index of a block in this view.
    pub fn seen_index(&self, id: BlockId) -> Option<usize> {
        self.seen_order.iter().position(|&b| b == id)
    }

    /// Inserts a block. The first insertion must be a genesis block; any
    /// later block must extend a known parent by exactly one height unit.
    pub fn add_block(&mut self, block: Block) -> Result<(), ChainError> {
        if self.blocks.contains_key(&block.id) {
            return Err(ChainError::DuplicateId(block.id));
        }
        match block.parent {
            None => {
                if self.genesis.is_some() {
                    return Err(ChainError::DuplicateId(block.id));
                }
                if block.height != 0 {
                    return Err(ChainError::HeightMismatch {
                        id: block.id,
                        height: block.height,
                        parent_height: 0,
                    });
                }
                self.genesis = Some(block.id);
            }
            Some(parent) => {
                let parent_height = self
                    .blocks
                    .get(&parent)
                    .ok_or(ChainError::UnknownParent(parent))?
                    .height;
                if block.height != parent_height + 1 {
                    return Err(ChainError::HeightMismatch {
                        id: block.id,
                        height: block.height,
                        parent_height,
                    });
                }
                self.children.entry(parent).or_default().push(block.id);
                let mut skips = vec![parent];
                let mut k = 0;
                while let Some(&next) = self.skips.get(&skips[k]).and_then(|v| v.get(k)) {
                    skips.push(next);
                    k += 1;
                }
                self.skips.insert(block.id, skips);
            }
        }
        if block.parent.is_none() {
            self.skips.insert(block.id, Vec::new());
        }
        self.seen_order.push(block.id);
        self.blocks.insert(block.id, block);
        Ok(())
    }

    /// The chain of a block: `(B, P(B), ..., genesis)`, length `h(B) + 1`.
    pub fn chain_of(&self, id: BlockId) -> Result<Vec<BlockId>, ChainError> {
        let mut chain = Vec::new();
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            let block = self.block(c)?;
            chain.push(c);
            cursor = block.parent;
        }
        Ok(chain)
    }

    /// Ancestor of `id` at the given height, via the binary-lifting table.
    pub fn ancestor_at(&self, id: BlockId, height: u64) -> Result<BlockId, ChainError> {
        let block = self.block(id)?;
        if height > block.height {
            return Err(ChainError::DomainError(format!(
                "ancestor height {height} above block height {}",
                block.height
            )));
        }
        let mut cur = id;
        let mut diff = block.height - height;
        while diff > 0 {
            let k = diff.trailing_zeros() as usize;
            cur = self.skips[&cur][k];
            diff &= diff - 1;
        }
        Ok(cur)
    }

    /// True iff `ancestor` lies on the chain of `descendant` (inclusive).
    pub fn is_ancestor(&self, ancestor: BlockId, descendant: BlockId) -> Result<bool, ChainError> {
        let target = self.block(ancestor)?.height;
        let desc = self.block(descendant)?;
        if target > desc.height {
            return Ok(false);
        }
        Ok(self.ancestor_at(descendant, target)? == ancestor)
    }

    /// Blocks with no known children.
    pub fn leaves(&self) -> Vec<BlockId> {
        let mut leaves: Vec<BlockId> = self
            .seen_order
            .iter()
            .copied()
            .filter(|id| self.children.get(id).map_or(true, |c| c.is_empty()))
            .collect();
        leaves.sort_unstable();
        leaves
    }
}

/// Epoch of a block height: `floor(height / l)`.
pub fn epoch_of(height: u64, epoch_length: u64) -> u64 {
    debug_assert!(epoch_length >= 1);
    height / epoch_length
}

/// True iff the height is a multiple of the epoch length.
pub fn is_checkpoint(height: u64, epoch_length: u64) -> bool {
    debug_assert!(epoch_length >= 1);
    height % epoch_length == 0
}

/// Probability that a miner controlling a fraction `alpha` of the mining
/// power closes a deficit of `k` blocks: `(alpha / (1 - alpha))^k`.
pub fn overtake_probability(alpha: Real, k: u32) -> Result<Real, ChainError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ChainError::DomainError(format!(
            "mining share {alpha} outside (0, 0.5)"
        )));
    }
    let ratio = alpha / (1.0 - alpha);
    Ok(ratio.powi(k as i32).clamp(0.0, 1.0))
}

/// Selects the head of the chain.
///
/// Among leaves whose chains contain every known finalized checkpoint, the
/// winner is the leaf whose chain carries the justified checkpoint of the
/// highest epoch (counting only justifications recorded with total deposit
/// at or above `min_fork_choice_deposit`); ties break by greatest height,
/// then by earliest arrival. With no justified checkpoint beyond genesis
/// this reduces to pure longest-chain plus first-seen.
pub fn fork_choice(
    view: &ChainView,
    finality: &FinalityState,
    params: &ProtocolParams,
) -> Result<BlockId, ChainError> {
    let genesis = view
        .genesis()
        .ok_or(ChainError::DomainError("empty view".into()))?;

    let finalized: Vec<BlockId> = finality.finalized_ids().collect();
    let mut candidates: Vec<BlockId> = Vec::new();
    for leaf in view.leaves() {
        let mut ok = true;
        for &f in &finalized {
            if !view.is_ancestor(f, leaf)? {
                ok = false;
                break;
            }
        }
        if ok {
            candidates.push(leaf);
        }
    }
    if candidates.is_empty() {
        // Conflicting finalized checkpoints: no leaf can honor all of them.
        candidates = view.leaves();
    }

    let mut best: Option<(u64, u64, usize, BlockId)> = None;
    for leaf in candidates {
        let mut justified_epoch = 0u64;
        let mut cursor = Some(leaf);
        while let Some(c) = cursor {
            if let Some(just) = finality.justification(c) {
                if just.total_deposit >= params.min_fork_choice_deposit || c == genesis {
                    let epoch = epoch_of(view.height_of(c)?, params.epoch_length);
                    justified_epoch = justified_epoch.max(epoch);
                }
            }
            cursor = view.block(c)?.parent;
        }
        let height = view.height_of(leaf)?;
        let seen = view.seen_index(leaf).expect("leaf is in the view");
        let better = match best {
            None => true,
            Some((je, h, s, _)) => {
                (justified_epoch, height) > (je, h)
                    || ((justified_epoch, height) == (je, h) && seen < s)
            }
        };
        if better {
            best = Some((justified_epoch, height, seen, leaf));
        }
    }
    Ok(best.expect("non-empty view has at least one leaf").3)
}
