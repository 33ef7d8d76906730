//! Closed-form and semi-numerical analysis: finalization-recovery times,
//! worst-case delay, partition race probabilities, incentive tables and
//! gas-overhead estimates.

use thiserror::Error;

use crate::finality::meets_threshold;
use crate::rewards::{collective_reward_factor, individual_reward_factor, update_deposit};
use crate::special::ln_reg_inc_beta_int;
use crate::strategies::worst_case_delta;
use crate::{ProtocolParams, Real};

/// Iteration cap for the recovery recursions, so a mis-parameterized call
/// cannot hang.
pub const MAX_RECOVERY_EPOCHS: u64 = 1_000_000;

/// Nominal epoch duration at full mining power: 50 blocks at 14 s.
pub const EPOCH_SECONDS: Real = 700.0;

/// Epochs in 365 days of 700-second epochs, floored. Used by the
/// interest-calibration check only.
pub const EPOCHS_PER_YEAR: u64 = 45_051;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("recursion did not converge within {MAX_RECOVERY_EPOCHS} epochs")]
    NoConvergence,
}

/// Epochs until finalization resumes after a group holding `offline_share`
/// of the stake permanently stops voting at the start of an epoch with
/// ESF = 2.
///
/// Follows the two-validator recursion: the voting group's deposit is held
/// fixed while the silent group's deposit decays by `1/(1 + rho_i)` per
/// epoch, with `rho_i` growing through the ESF penalty term. The returned
/// epoch is the one in which the first new checkpoint is finalized (one
/// epoch after the supermajority is regained). Zero when the remaining
/// voters already hold a supermajority. Shares the arithmetic path of the
/// simulator's deposit updates, so the two agree exactly.
pub fn phi(offline_share: Real, params: &ProtocolParams, d0: Real) -> Result<u64, AnalysisError> {
    if !(offline_share > 0.0 && offline_share <= 1.0) {
        return Err(AnalysisError::Domain(format!(
            "offline share {offline_share} outside (0, 1]"
        )));
    }
    if !(d0 > 0.0) {
        return Err(AnalysisError::Domain("initial deposit must be positive".into()));
    }
    let threshold = params.finality_threshold;
    let mut voting = (1.0 - offline_share) * d0;
    let mut silent = offline_share * d0;
    if meets_threshold(voting, voting + silent, threshold) {
        return Ok(0);
    }
    for i in 0..MAX_RECOVERY_EPOCHS {
        let total = voting + silent;
        if meets_threshold(voting, total, threshold) {
            // Justified at epoch i; the checkpoint finalizes one epoch later.
            return Ok(i + 1);
        }
        let esf = i + 2;
        let rho = individual_reward_factor(total, esf, params.gamma, params.beta, params.p);
        let collective = collective_reward_factor(voting / total, rho, esf);
        voting = update_deposit(voting, true, rho, collective);
        silent = update_deposit(silent, false, rho, collective);
    }
    Err(AnalysisError::NoConvergence)
}

/// Epochs until finalization resumes against the coordinated adversary
/// that keeps total participation marginally below the threshold each
/// epoch (idealized continuous participation fraction).
///
/// `alpha0` is the stake share of the consistently voting group.
pub fn worst_case_recovery(
    alpha0: Real,
    params: &ProtocolParams,
    d0: Real,
) -> Result<u64, AnalysisError> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(AnalysisError::Domain(format!(
            "honest share {alpha0} outside (0, 1)"
        )));
    }
    let threshold = params.finality_threshold;
    let mut honest = alpha0 * d0;
    let mut adversary = (1.0 - alpha0) * d0;
    for i in 0..MAX_RECOVERY_EPOCHS {
        let total = honest + adversary;
        let alpha_i = honest / total;
        if alpha_i > threshold {
            return Ok(i + 1);
        }
        let delta = worst_case_delta(alpha_i);
        let esf = i + 2;
        let rho = individual_reward_factor(total, esf, params.gamma, params.beta, params.p);
        let participation = alpha_i + delta * (1.0 - alpha_i);
        let collective = collective_reward_factor(participation, rho, esf);
        honest = update_deposit(honest, true, rho, collective);
        let voting_part = update_deposit(delta * adversary, true, rho, collective);
        let silent_part = update_deposit((1.0 - delta) * adversary, false, rho, collective);
        adversary = voting_part + silent_part;
    }
    Err(AnalysisError::NoConvergence)
}

/// A race between two chains that need a given number of blocks each,
/// with chain 1 holding a `mu` share of the mining power and chain 2 the
/// complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceSpec {
    /// Blocks chain 1 must produce.
    pub n1: u64,
    /// Blocks chain 2 must produce.
    pub n2: u64,
    /// Mining share of chain 1.
    pub mu: Real,
}

/// Race probability with its log, since extreme tails underflow `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceProbability {
    pub p: Real,
    pub log10_p: Real,
    /// True when the probability is positive but below the representable
    /// range, so `p` reads as zero.
    pub underflow: bool,
}

/// Probability that chain 1 produces its `n1` blocks before chain 2
/// produces its `n2`, with exponential block intervals: the regularized
/// incomplete beta `I_mu(n1, n2)`, evaluated by the exact integer-parameter
/// binomial summation in the log domain.
pub fn race_probability(spec: &RaceSpec) -> Result<RaceProbability, AnalysisError> {
    if spec.n1 < 1 || spec.n2 < 1 {
        return Err(AnalysisError::Domain("block counts must be >= 1".into()));
    }
    if !(spec.mu > 0.0 && spec.mu < 1.0) {
        return Err(AnalysisError::Domain(format!(
            "mining share {} outside (0, 1)",
            spec.mu
        )));
    }
    let ln_p = ln_reg_inc_beta_int(spec.n1, spec.n2, spec.mu);
    let p = ln_p.exp();
    Ok(RaceProbability {
        p,
        log10_p: ln_p / std::f64::consts::LN_10,
        underflow: p == 0.0 && ln_p.is_finite(),
    })
}

/// Mining share at which the race is even: solves `mu/(1-mu) = n1/n2`,
/// i.e. `mu = n1/(n1+n2)`.
pub fn mu_breakeven(n1: u64, n2: u64) -> Real {
    debug_assert!(n1 >= 1 && n2 >= 1);
    n1 as Real / (n1 + n2) as Real
}

/// Justification regime for the incentive tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JustificationScenario {
    AlwaysJustified,
    NeverJustified,
    SwingVoter,
}

/// One row of the abstention incentive tables: relative losses for the
/// abstainer, the other voters and the non-voters, plus the proportional
/// loss ratios and griefing factors for both groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncentiveRow {
    pub scenario: JustificationScenario,
    pub loss_abstainer: Real,
    pub loss_voters: Real,
    pub loss_nonvoters: Real,
    pub plr_voters: Real,
    pub plr_nonvoters: Real,
    pub gf_voters: Real,
    pub gf_nonvoters: Real,
}

/// Evaluates the single-epoch abstention tables for a validator holding a
/// stake share `alpha`, with `mu` the combined share of that validator and
/// the other voters, at individual reward factor `rho`.
///
/// The griefing factor of a group relates to its proportional loss ratio
/// through the group's stake: `GF_g = (stake_g / alpha) * PLR_g`, with
/// stakes `mu - alpha` for the voters and `1 - mu` for the non-voters.
/// Both sides are computed here by independent routes (closed forms for
/// the GFs, the stake identity is checked in tests).
pub fn incentive_tables(
    alpha: Real,
    mu: Real,
    rho: Real,
) -> Result<Vec<IncentiveRow>, AnalysisError> {
    if !(alpha > 0.0 && alpha < 2.0 / 3.0) {
        return Err(AnalysisError::Domain(format!(
            "abstainer stake {alpha} outside (0, 2/3)"
        )));
    }
    if !(mu >= alpha && mu <= 1.0) {
        return Err(AnalysisError::Domain(format!(
            "voting share {mu} outside [alpha, 1]"
        )));
    }
    if !(rho >= 0.0) {
        return Err(AnalysisError::Domain("rho must be non-negative".into()));
    }

    let base = rho / (1.0 + rho);

    // Justification unaffected by the abstention.
    let denom_always = 1.0 + 0.5 * (mu * rho + alpha);
    let always = IncentiveRow {
        scenario: JustificationScenario::AlwaysJustified,
        loss_abstainer: base * denom_always,
        loss_voters: 0.5 * alpha * rho,
        loss_nonvoters: base * 0.5 * alpha,
        plr_voters: 0.5 * alpha * (1.0 + rho) / denom_always,
        plr_nonvoters: 0.5 * alpha / denom_always,
        gf_voters: 0.5 * (mu - alpha) * (1.0 + rho) / denom_always,
        gf_nonvoters: 0.5 * (1.0 - mu) / denom_always,
    };

    let never = IncentiveRow {
        scenario: JustificationScenario::NeverJustified,
        loss_abstainer: base,
        loss_voters: 0.0,
        loss_nonvoters: 0.0,
        plr_voters: 0.0,
        plr_nonvoters: 0.0,
        gf_voters: 0.0,
        gf_nonvoters: 0.0,
    };

    // The abstainer's vote decides justification.
    let denom_swing = 1.0 + 0.5 * mu * (1.0 + rho);
    let swing = IncentiveRow {
        scenario: JustificationScenario::SwingVoter,
        loss_abstainer: base * denom_always,
        loss_voters: 0.5 * mu * rho,
        loss_nonvoters: base * 0.5 * mu,
        plr_voters: 0.5 * mu * (1.0 + rho) / denom_swing,
        plr_nonvoters: 0.5 * mu / denom_swing,
        gf_voters: 0.5 * mu * (mu - alpha) * (1.0 + rho) / (alpha * denom_swing),
        gf_nonvoters: 0.5 * mu * (1.0 - mu) / (alpha * denom_swing),
    };

    Ok(vec![always, never, swing])
}

/// Per-epoch share of the block gas limit consumed by the contract calls:
/// one epoch-initialization call in the first `l - vote_window` blocks and
/// one vote per validator in the trailing `vote_window` blocks.
pub fn gas_overhead(
    n_validators: u64,
    vote_gas: Real,
    init_gas: Real,
    block_gas_limit: Real,
    epoch_length: u64,
    vote_window_blocks: u64,
) -> (Real, Real) {
    debug_assert!(vote_window_blocks < epoch_length);
    let init_fraction = init_gas / ((epoch_length - vote_window_blocks) as Real * block_gas_limit);
    let vote_fraction = n_validators as Real * vote_gas / (vote_window_blocks as Real * block_gas_limit);
    (init_fraction, vote_fraction)
}

/// Compounded yearly growth factor for a consistently voting validator at
/// total deposit `d` with full participation and on-schedule finalization.
pub fn annual_voter_interest(d: Real, params: &ProtocolParams) -> Real {
    let rho = individual_reward_factor(d, 2, params.gamma, params.beta, params.p);
    (1.0 + 0.5 * rho).powi(EPOCHS_PER_YEAR as i32)
}

/// CSV table of recovery epochs over a grid of offline shares.
pub fn phi_curve_csv(
    offline_shares: &[Real],
    params: &ProtocolParams,
    d0: Real,
) -> Result<String, AnalysisError> {
    let mut out = String::from("offline_share,recovery_epochs\n");
    for &a in offline_shares {
        out.push_str(&format!("{a},{}\n", phi(a, params, d0)?));
    }
    Ok(out)
}

/// CSV table of race probabilities over a grid of mining shares.
pub fn race_curve_csv(n1: u64, n2: u64, mus: &[Real]) -> Result<String, AnalysisError> {
    let mut out = String::from("mu,probability,log10_probability\n");
    for &mu in mus {
        let r = race_probability(&RaceSpec { n1, n2, mu })?;
        out.push_str(&format!("{mu},{:e},{}\n", r.p, r.log10_p));
    }
    Ok(out)
}

/// CSV dump of the incentive tables.
pub fn incentive_tables_csv(alpha: Real, mu: Real, rho: Real) -> Result<String, AnalysisError> {
    let mut out = String::from(
        "scenario,loss_abstainer,loss_voters,loss_nonvoters,plr_voters,plr_nonvoters,gf_voters,gf_nonvoters\n",
    );
    for row in incentive_tables(alpha, mu, rho)? {
        let name = match row.scenario {
            JustificationScenario::AlwaysJustified => "always",
            JustificationScenario::NeverJustified => "never",
            JustificationScenario::SwingVoter => "swing",
        };
        out.push_str(&format!(
            "{name},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            row.loss_abstainer,
            row.loss_voters,
            row.loss_nonvoters,
            row.plr_voters,
            row.plr_nonvoters,
            row.gf_voters,
            row.gf_nonvoters
        ));
    }
    Ok(out)
}
