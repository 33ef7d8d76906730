//! The incentive scheme: individual and collective reward factors,
//! penalties driven by epochs-since-finalization, and per-epoch deposit
//! updates.
//!
//! The formula layer is generic over the scalar type; the stateful
//! [`epoch_transition`] works on [`Real`] deposits.

use crate::finality::ValidatorId;
use crate::num::Scalar;
use crate::{ProtocolParams, Real};

/// Per-validator deposit trajectory and voting flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorState {
    pub id: ValidatorId,
    pub deposit: Real,
    pub voted_this_epoch: bool,
    pub slashed: bool,
    /// Validators queued while finalization is stalled; activated only when
    /// ESF returns to 2.
    pub pending_activation: bool,
    pub logout_epoch: Option<u64>,
    pub withdraw_epoch: Option<u64>,
}

impl ValidatorState {
    pub fn new(id: ValidatorId, deposit: Real) -> Self {
        ValidatorState {
            id,
            deposit,
            voted_this_epoch: false,
            slashed: false,
            pending_activation: false,
            logout_epoch: None,
            withdraw_epoch: None,
        }
    }

    /// Active validators vote and earn; slashed, pending and logged-out
    /// validators do not.
    pub fn is_active(&self, epoch: u64) -> bool {
        !self.slashed
            && !self.pending_activation
            && self.logout_epoch.map_or(true, |e| epoch < e)
    }
}

/// Per-epoch aggregate accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochAccounting {
    pub epoch: u64,
    pub total_deposit: Real,
    /// Deposit-weighted fraction of correctly voting validators.
    pub voted_fraction: Real,
    pub esf: u64,
    pub rho: Real,
    pub collective: Real,
}

/// Individual reward factor: `gamma * D^(-p) + beta * (esf - 2)` for
/// positive total deposit, zero otherwise. Floored at zero so that the
/// (never exercised under defaults) `esf < 2` case cannot turn it negative.
pub fn individual_reward_factor<F: Scalar>(
    total_deposit: F,
    esf: u64,
    gamma: F,
    beta: F,
    p: F,
) -> F {
    if !(total_deposit > F::zero()) {
        return F::zero();
    }
    let esf_term = F::from_i64(esf as i64 - 2).expect("small integer");
    let rho = gamma * total_deposit.powf(-p) + beta * esf_term;
    rho.max(F::zero())
}

/// Collective reward factor: `m * rho / 2` when ESF is exactly 2, zero
/// otherwise.
pub fn collective_reward_factor<F: Scalar>(voted_fraction: F, rho: F, esf: u64) -> F {
    if esf == 2 {
        F::c(0.5) * voted_fraction * rho
    } else {
        F::zero()
    }
}

/// Deposit update `(1 + C) * (1 + voted * rho) / (1 + rho) * d`.
///
/// A voting validator with `C = 0` keeps its deposit bit-identical: the
/// numerator and denominator are the same value, so the quotient is exactly
/// one.
pub fn update_deposit<F: Scalar>(deposit: F, voted: bool, rho: F, collective: F) -> F {
    let one = F::one();
    let numerator = if voted { one + rho } else { one };
    (one + collective) * (numerator / (one + rho)) * deposit
}

/// Sum of active deposits. The total is always recomputed from the
/// individual deposits, never carried incrementally.
pub fn total_deposit(validators: &[ValidatorState], epoch: u64) -> Real {
    validators
        .iter()
        .filter(|v| v.is_active(epoch))
        .map(|v| v.deposit)
        .sum()
}

/// Closes an epoch: computes the aggregate factors from the recorded
/// voting flags, applies the deposit update to every active validator and
/// clears the flags.
///
/// Updates are suspended while `esf < 2`: the update table is defined for
/// the finalizing (`esf = 2`) and stalled (`esf > 2`) regimes only, and the
/// first two epochs after genesis fall in neither. Activation of pending
/// validators is blocked while checkpoints are not being finalized.
pub fn epoch_transition(
    validators: &mut [ValidatorState],
    epoch: u64,
    esf: u64,
    params: &ProtocolParams,
) -> EpochAccounting {
    let total = total_deposit(validators, epoch);
    let voted: Real = validators
        .iter()
        .filter(|v| v.is_active(epoch) && v.voted_this_epoch)
        .map(|v| v.deposit)
        .sum();
    let voted_fraction = if total > 0.0 { voted / total } else { 0.0 };
    let rho = individual_reward_factor(total, esf, params.gamma, params.beta, params.p);
    let collective = collective_reward_factor(voted_fraction, rho, esf);

    if esf >= 2 {
        for v in validators.iter_mut() {
            if v.is_active(epoch) {
                v.deposit = update_deposit(v.deposit, v.voted_this_epoch, rho, collective);
            }
        }
    }
    for v in validators.iter_mut() {
        v.voted_this_epoch = false;
        if v.pending_activation && esf == 2 {
            v.pending_activation = false;
        }
    }

    EpochAccounting {
        epoch,
        total_deposit: total,
        voted_fraction,
        esf,
        rho,
        collective,
    }
}
