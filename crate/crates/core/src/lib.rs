//! A chain-agnostic model of the hybrid Casper FFG checkpoint-finality
//! protocol: votes, justification and finalization, slashing, the deposit
//! reward scheme, and the justification-aware fork-choice rule, together
//! with a deterministic epoch simulator and a closed-form analysis suite
//! (finalization-recovery times, partition race probabilities, incentive
//! tables, gas-overhead estimates).
//!
//! The numeric core is generic over the scalar type via [`num::Scalar`];
//! the simulator and the concrete type aliases at the crate root work in
//! `f64`.

pub mod analysis;
pub mod chain;
pub mod finality;
pub mod num;
pub mod rewards;
pub mod sim;
pub mod slashing;
pub mod special;
pub mod strategies;

pub use chain::{Block, BlockId, ChainView, ProtocolParams};
pub use finality::{FinalityState, ValidatorId, Vote};
pub use rewards::ValidatorState;
pub use sim::{ScenarioConfig, SimTrace};
pub use strategies::Strategy;

/// Concrete scalar used by the simulator and the default analysis entry
/// points. Deposits, stake fractions and probabilities are all `Real`.
pub type Real = f64;
