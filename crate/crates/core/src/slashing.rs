//! Detection and adjudication of conflicting votes: the two slashing
//! conditions, the finder's fee, and severity scaled by recently slashed
//! stake.

use std::collections::HashMap;

use thiserror::Error;

use crate::finality::{ValidatorId, Vote};
use crate::rewards::ValidatorState;
use crate::Real;

/// Finder's fee: fraction of the offender's deposit paid to the reporter.
pub const FINDERS_FEE: Real = 0.04;

/// Severity multiplier on the recently slashed stake fraction.
pub const SEVERITY_MULTIPLIER: Real = 3.0;

/// Default sliding-window length: two weeks of 700-second epochs.
pub const DEFAULT_WINDOW_EPOCHS: u64 = 1728;

/// Which slashing condition a vote pair violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Two distinct votes for the same target height.
    ConditionI,
    /// One vote's span strictly inside the other's.
    ConditionII,
}

/// Two potentially offending vote messages plus the reporter.
#[derive(Debug, Clone, PartialEq)]
pub struct SlashEvidence {
    pub vote_a: Vote,
    pub vote_b: Vote,
    pub reporter: ValidatorId,
}

#[derive(Debug, Error, PartialEq)]
pub enum SlashError {
    #[error("evidence does not violate a slashing condition")]
    InvalidEvidence,
    #[error("validator {0:?} is already slashed")]
    AlreadySlashed(ValidatorId),
    #[error("unknown validator {0:?}")]
    UnknownValidator(ValidatorId),
}

/// Checks a vote pair against both slashing conditions. Symmetric in its
/// arguments; votes from different validators never violate.
pub fn violates(a: &Vote, b: &Vote) -> Option<Violation> {
    if a.validator != b.validator || a == b {
        return None;
    }
    if a.target_height == b.target_height {
        return Some(Violation::ConditionI);
    }
    let nested = |outer: &Vote, inner: &Vote| {
        outer.source_height < inner.source_height
            && inner.source_height < inner.target_height
            && inner.target_height < outer.target_height
    };
    if nested(a, b) || nested(b, a) {
        return Some(Violation::ConditionII);
    }
    None
}

/// Outcome of one adjudicated offense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlashOutcome {
    pub offender: ValidatorId,
    pub violation: Violation,
    /// Fraction of the offender's deposit slashed.
    pub slashed_fraction: Real,
    pub loss: Real,
    pub fee: Real,
    pub burned: Real,
}

#[derive(Debug, Clone, Copy)]
struct Offense {
    epoch: u64,
    loss: Real,
}

/// Rolling accounting of slashed stake. Severity of a new offense scales
/// with the stake slashed inside the sliding window, including the offense
/// being adjudicated, with the finder's fee as a floor.
#[derive(Debug, Clone)]
pub struct SlashLedger {
    pub window_epochs: u64,
    pub burned_total: Real,
    pub fees_paid: Real,
    offenses: Vec<Offense>,
}

impl Default for SlashLedger {
    fn default() -> Self {
        SlashLedger::new(DEFAULT_WINDOW_EPOCHS)
    }
}

impl SlashLedger {
    pub fn new(window_epochs: u64) -> Self {
        SlashLedger {
            window_epochs,
            burned_total: 0.0,
            fees_paid: 0.0,
            offenses: Vec::new(),
        }
    }

    /// Stake slashed within the window ending at `current_epoch`.
    pub fn recent_slashed(&self, current_epoch: u64) -> Real {
        self.offenses
            .iter()
            .filter(|o| o.epoch + self.window_epochs > current_epoch)
            .map(|o| o.loss)
            .sum()
    }

    /// Test/bootstrap helper: preloads slashed stake into the window.
    pub fn preload(&mut self, epoch: u64, loss: Real) {
        self.offenses.push(Offense { epoch, loss });
    }
}

/// Adjudicates evidence: verifies the violation, deactivates the offender,
/// pays the reporter the finder's fee and burns the rest of the loss.
///
/// The slashed fraction is `min(1, 3 * f)` with `f` the window fraction of
/// slashed stake including the offender's own deposit, floored at the 4%
/// fee. Invalid evidence is rejected without state change. Slash messages
/// never expire, so the votes may reference arbitrarily old epochs.
pub fn apply_slash(
    validators: &mut [ValidatorState],
    ledger: &mut SlashLedger,
    evidence: &SlashEvidence,
    total_deposit: Real,
    current_epoch: u64,
) -> Result<SlashOutcome, SlashError> {
    let violation = violates(&evidence.vote_a, &evidence.vote_b).ok_or(SlashError::InvalidEvidence)?;
    let offender_id = evidence.vote_a.validator;
    let offender_idx = validators
        .iter()
        .position(|v| v.id == offender_id)
        .ok_or(SlashError::UnknownValidator(offender_id))?;
    if validators[offender_idx].slashed {
        return Err(SlashError::AlreadySlashed(offender_id));
    }

    let deposit = validators[offender_idx].deposit;
    let window_fraction = if total_deposit > 0.0 {
        (ledger.recent_slashed(current_epoch) + deposit) / total_deposit
    } else {
        1.0
    };
    let slashed_fraction = (SEVERITY_MULTIPLIER * window_fraction)
        .min(1.0)
        .max(FINDERS_FEE);
    let loss = slashed_fraction * deposit;
    let fee = FINDERS_FEE * deposit;
    let burned = loss - fee;

    validators[offender_idx].deposit -= loss;
    validators[offender_idx].slashed = true;
    if let Some(reporter) = validators.iter_mut().find(|v| v.id == evidence.reporter) {
        reporter.deposit += fee;
    }
    ledger.offenses.push(Offense {
        epoch: current_epoch,
        loss,
    });
    ledger.burned_total += burned;
    ledger.fees_paid += fee;

    Ok(SlashOutcome {
        offender: offender_id,
        violation,
        slashed_fraction,
        loss,
        fee,
        burned,
    })
}

/// Deposit-weighted fraction of validators owning at least one violating
/// vote pair, found by brute-force scan over all pairs in the record.
pub fn min_slashable_for_conflict(
    votes: &[Vote],
    deposits: &HashMap<ValidatorId, Real>,
) -> Real {
    let total: Real = deposits.values().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut by_validator: HashMap<ValidatorId, Vec<&Vote>> = HashMap::new();
    for v in votes {
        by_validator.entry(v.validator).or_default().push(v);
    }
    let mut slashable = 0.0;
    for (id, vs) in &by_validator {
        let guilty = vs
            .iter()
            .enumerate()
            .any(|(i, a)| vs[i + 1..].iter().any(|b| violates(a, b).is_some()));
        if guilty {
            slashable += deposits.get(id).copied().unwrap_or(0.0);
        }
    }
    slashable / total
}
