//! The deterministic epoch-driven simulator.
//!
//! One run owns a single global block tree. Network partitions are modeled
//! as branches: each branch keeps its own copy of the validator deposits
//! and its own justification state, since the two sides of a partition
//! update deposits from what they can see. Votes become mutually visible
//! (and equivocations punishable) only while a single branch exists.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::chain::{Block, ChainError, ChainView};
use crate::finality::{FinalityError, FinalityState, ValidatorId, Vote, VoteValidity};
use crate::rewards::{epoch_transition, total_deposit, ValidatorState};
use crate::slashing::{violates, apply_slash, SlashEvidence, SlashLedger, SlashOutcome};
use crate::strategies::{decide_votes, BranchId, EpochSnapshot, Strategy, VoteTemplate};
use crate::{BlockId, Real};

use super::config::{ProposalModel, ScenarioConfig};
use super::trace::{Recovery, SimTrace, TraceMeta, TraceRow};

const RNG_NAME: &str = "chacha12";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Finality(#[from] FinalityError),
    #[error("simulation invariant violated: {0}")]
    Internal(String),
}

/// One side of the (possibly partitioned) network.
#[derive(Debug, Clone)]
struct Branch {
    id: BranchId,
    mining_share: Real,
    seconds: Real,
    head: BlockId,
    validators: Vec<ValidatorState>,
    finality: FinalityState,
    /// Checkpoint height (in epochs) and block of the highest justified
    /// checkpoint on this branch's chain; honest votes use it as source.
    last_justified_height: u64,
    last_justified_block: BlockId,
}

/// Runs a scenario to completion and returns its trace.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    let params = &config.params;
    let l = params.epoch_length;
    let threshold = params.finality_threshold;
    let secret = config.seed ^ 0x7369_6d5f_7365_6372;
    let fault_epoch = config.effective_fault_epoch();

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut view = ChainView::new();
    let genesis: BlockId = 0;
    view.add_block(Block::genesis(genesis))?;
    let mut next_id: BlockId = 1;

    let mut branches = vec![Branch {
        id: 0,
        mining_share: 1.0,
        seconds: 0.0,
        head: genesis,
        validators: config
            .validators
            .iter()
            .map(|v| ValidatorState::new(ValidatorId(v.id), v.deposit))
            .collect(),
        finality: FinalityState::new(genesis),
        last_justified_height: 0,
        last_justified_block: genesis,
    }];

    let mut history: HashMap<ValidatorId, Vec<Vote>> = HashMap::new();
    let mut ledger = SlashLedger::default();
    let mut slashes: Vec<SlashOutcome> = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut recovery: Option<Recovery> = None;

    for epoch in 1..=config.max_epochs {
        if let Some(p) = &config.partition {
            if p.end_epoch == Some(epoch) && branches.len() > 1 {
                heal(&mut branches);
                punish_equivocations(
                    &mut branches[0],
                    &history,
                    &mut ledger,
                    &mut slashes,
                    config,
                    epoch,
                );
            }
            if epoch == p.start_epoch {
                split(&mut branches, p);
            }
        }

        // Block production, branch by branch in id order; a branch with a
        // mu share of the mining power produces blocks with mean interval
        // scaled by 1/mu.
        for branch in branches.iter_mut() {
            let mean = config.proposal.mean_block_seconds() / branch.mining_share;
            for _ in 0..l {
                let dt = match config.proposal {
                    ProposalModel::Deterministic { .. } => mean,
                    ProposalModel::Stochastic { .. } => {
                        Exp::new(1.0 / mean).expect("positive rate").sample(&mut rng)
                    }
                };
                branch.seconds += dt;
                let height = view.height_of(branch.head)? + 1;
                view.add_block(Block::new(next_id, branch.head, height, next_id))?;
                branch.head = next_id;
                next_id += 1;
            }
        }

        // After production each head sits exactly on this epoch's checkpoint.
        let templates: Vec<VoteTemplate> = branches
            .iter()
            .map(|b| VoteTemplate {
                branch: b.id,
                target: b.head,
                target_height: epoch,
                source_height: b.last_justified_height,
            })
            .collect();

        let default_home = branches[0].id;
        let resolve = |strategy: &Strategy| -> (Strategy, BranchId) {
            match strategy {
                Strategy::PartitionHonest { branch } => {
                    if branches.iter().any(|b| b.id == *branch) {
                        (Strategy::Honest, *branch)
                    } else {
                        (Strategy::Honest, default_home)
                    }
                }
                other => (other.clone(), default_home),
            }
        };
        let deposit_on = |branches: &[Branch], branch: BranchId, id: ValidatorId| -> Option<Real> {
            branches
                .iter()
                .find(|b| b.id == branch)?
                .validators
                .iter()
                .find(|v| v.id == id && v.is_active(epoch))
                .map(|v| v.deposit)
        };

        // First pass: every non-adversarial vote.
        let mut pending: Vec<(BranchId, Vote)> = Vec::new();
        for vc in &config.validators {
            if matches!(vc.strategy, Strategy::WorstCase) {
                continue;
            }
            let id = ValidatorId(vc.id);
            let (strategy, home) = resolve(&vc.strategy);
            if deposit_on(&branches, home, id).is_none() {
                continue;
            }
            let snap = EpochSnapshot {
                epoch,
                templates: &templates,
                home,
                wc_selected: false,
                secret,
            };
            pending.extend(decide_votes(&strategy, id, &snap));
        }

        // Second pass: the coordinated adversary votes just enough members,
        // largest deposits first, to stay strictly below the threshold.
        for branch in &branches {
            let total = total_deposit(&branch.validators, epoch);
            let mut tally: Real = pending
                .iter()
                .filter(|(b, _)| *b == branch.id)
                .filter_map(|(b, v)| deposit_on(&branches, *b, v.validator))
                .sum();
            let mut members: Vec<(Real, u32)> = config
                .validators
                .iter()
                .filter(|vc| matches!(vc.strategy, Strategy::WorstCase))
                .filter_map(|vc| {
                    deposit_on(&branches, branch.id, ValidatorId(vc.id)).map(|d| (d, vc.id))
                })
                .collect();
            members.sort_by(|a, b| b.partial_cmp(a).expect("finite deposits"));
            for (deposit, id) in members {
                let selected = !crate::finality::meets_threshold(tally + deposit, total, threshold);
                if !selected {
                    continue;
                }
                tally += deposit;
                let snap = EpochSnapshot {
                    epoch,
                    templates: &templates,
                    home: branch.id,
                    wc_selected: true,
                    secret,
                };
                pending.extend(decide_votes(&Strategy::WorstCase, ValidatorId(id), &snap));
            }
        }

        // Deliver votes branch by branch, then close the branch's epoch.
        let visible = branches.len() == 1;
        let mut evidence: Vec<(BranchId, SlashEvidence)> = Vec::new();
        for branch in branches.iter_mut() {
            let esf = branch.finality.esf(epoch);
            let template = templates
                .iter()
                .find(|t| t.branch == branch.id)
                .expect("one template per branch");

            for (_, vote) in pending.iter().filter(|(b, _)| *b == branch.id) {
                let source = match branch.finality.validate_vote(&view, vote, epoch, secret, l) {
                    VoteValidity::Valid { source } => source,
                    VoteValidity::Invalid(_) => continue,
                };
                let Some(state) = branch
                    .validators
                    .iter_mut()
                    .find(|v| v.id == vote.validator && v.is_active(epoch))
                else {
                    continue;
                };
                if branch
                    .finality
                    .record_vote(vote.validator, source, vote.target, state.deposit)
                    .is_err()
                {
                    continue;
                }
                state.voted_this_epoch = true;
                let log = history.entry(vote.validator).or_default();
                if visible {
                    if let Some(prior) = log.iter().find(|h| violates(h, vote).is_some()) {
                        evidence.push((
                            branch.id,
                            SlashEvidence {
                                vote_a: *prior,
                                vote_b: *vote,
                                reporter: reporter_for(config, vote.validator),
                            },
                        ));
                    }
                }
                log.push(*vote);
            }

            let total = total_deposit(&branch.validators, epoch);
            let justified = branch.finality.try_justify(
                &view,
                branch.last_justified_block,
                template.target,
                total,
                threshold,
            )?;
            let mut finalized = false;
            if justified {
                if branch.last_justified_height + 1 == epoch {
                    let source = branch.last_justified_block;
                    let was = branch.finality.is_finalized(source);
                    if branch.finality.try_finalize(&view, source, l, epoch)? && !was {
                        finalized = true;
                        if recovery.is_none() {
                            if let Some(f) = fault_epoch {
                                // A finalization at the fault epoch itself
                                // means finality was never interrupted.
                                if epoch >= f {
                                    recovery = Some(Recovery {
                                        epoch,
                                        since_fault: epoch - f,
                                        seconds: branch.seconds,
                                    });
                                }
                            }
                        }
                    }
                }
                branch.last_justified_height = epoch;
                branch.last_justified_block = template.target;
            }

            let acc = epoch_transition(&mut branch.validators, epoch, esf, params);
            rows.push(TraceRow {
                branch: branch.id,
                epoch,
                seconds: branch.seconds,
                total_deposit: acc.total_deposit,
                voted_fraction: acc.voted_fraction,
                esf,
                rho: acc.rho,
                justified,
                finalized,
            });
        }

        for (branch_id, ev) in evidence {
            let branch = branches
                .iter_mut()
                .find(|b| b.id == branch_id)
                .expect("evidence references a live branch");
            let total = total_deposit(&branch.validators, epoch);
            if let Ok(outcome) =
                apply_slash(&mut branch.validators, &mut ledger, &ev, total, epoch)
            {
                slashes.push(outcome);
            }
        }

        if config.stop_on_recovery && recovery.is_some() {
            break;
        }
    }

    rows.sort_by_key(|r| (r.branch, r.epoch));
    Ok(SimTrace {
        meta: TraceMeta {
            scenario: config.name.clone(),
            seed: config.seed,
            rng: RNG_NAME,
            version: env!("CARGO_PKG_VERSION"),
            params: params.clone(),
            fault_epoch,
        },
        rows,
        recovery,
        slashes,
    })
}

fn reporter_for(config: &ScenarioConfig, offender: ValidatorId) -> ValidatorId {
    config
        .validators
        .iter()
        .map(|v| ValidatorId(v.id))
        .find(|&id| id != offender)
        .unwrap_or(offender)
}

fn split(branches: &mut Vec<Branch>, partition: &super::config::PartitionConfig) {
    let base = branches[0].clone();
    let mut out: Vec<Branch> = partition
        .branches
        .iter()
        .map(|bc| {
            let mut b = base.clone();
            b.id = bc.branch;
            b.mining_share = bc.mining_share;
            b
        })
        .collect();
    out.sort_by_key(|b| b.id);
    *branches = out;
}

/// Keeps the branch the fork-choice rule would pick: highest justified
/// checkpoint, then lowest id (all heads share a height, and lower ids were
/// seen first). The survivor gets the full mining power back.
fn heal(branches: &mut Vec<Branch>) {
    let winner = branches
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            (a.last_justified_height, std::cmp::Reverse(a.id))
                .cmp(&(b.last_justified_height, std::cmp::Reverse(b.id)))
        })
        .map(|(i, _)| i)
        .expect("at least one branch");
    let mut survivor = branches.swap_remove(winner);
    survivor.mining_share = 1.0;
    *branches = vec![survivor];
}

/// Scans the whole vote history for violating pairs once votes from both
/// partition sides are co-visible, and adjudicates each offender once.
fn punish_equivocations(
    branch: &mut Branch,
    history: &HashMap<ValidatorId, Vec<Vote>>,
    ledger: &mut SlashLedger,
    slashes: &mut Vec<SlashOutcome>,
    config: &ScenarioConfig,
    epoch: u64,
) {
    for (id, votes) in history {
        let pair = votes.iter().enumerate().find_map(|(i, a)| {
            votes[i + 1..]
                .iter()
                .find(|b| violates(a, b).is_some())
                .map(|b| (*a, *b))
        });
        let Some((vote_a, vote_b)) = pair else { continue };
        let evidence = SlashEvidence {
            vote_a,
            vote_b,
            reporter: reporter_for(config, *id),
        };
        let total = total_deposit(&branch.validators, epoch);
        if let Ok(outcome) = apply_slash(&mut branch.validators, ledger, &evidence, total, epoch) {
            slashes.push(outcome);
        }
    }
}
