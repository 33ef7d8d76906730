//! Simulation output: per-epoch rows, run metadata and CSV export.

use crate::slashing::SlashOutcome;
use crate::strategies::BranchId;
use crate::{ProtocolParams, Real};

/// One (branch, epoch) observation, taken at the end of the epoch before
/// the deposit update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub branch: BranchId,
    pub epoch: u64,
    /// Branch-local wall time at the end of the epoch.
    pub seconds: Real,
    pub total_deposit: Real,
    pub voted_fraction: Real,
    pub esf: u64,
    pub rho: Real,
    /// This epoch's checkpoint was justified.
    pub justified: bool,
    /// A checkpoint was newly finalized during this epoch.
    pub finalized: bool,
}

/// First finalization after the fault epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    /// Epoch during which the finalization happened.
    pub epoch: u64,
    pub since_fault: u64,
    pub seconds: Real,
}

/// Run metadata recorded in the trace header.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub rng: &'static str,
    pub version: &'static str,
    pub params: ProtocolParams,
    pub fault_epoch: Option<u64>,
}

/// Full result of a simulation run. Rows are ordered by (branch, epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    pub recovery: Option<Recovery>,
    pub slashes: Vec<SlashOutcome>,
}

impl SimTrace {
    /// First finalization strictly after the given epoch, from the rows.
    pub fn first_finalization_after(&self, epoch: u64) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.finalized && r.epoch > epoch)
    }

    pub fn rows_for_branch(&self, branch: BranchId) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.branch == branch)
    }

    /// CSV export: `#`-prefixed metadata comments, a header line, then one
    /// row per (branch, epoch).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# scenario: {}\n", self.meta.scenario));
        out.push_str(&format!("# seed: {}\n", self.meta.seed));
        out.push_str(&format!("# rng: {}\n", self.meta.rng));
        out.push_str(&format!("# version: {}\n", self.meta.version));
        let p = &self.meta.params;
        out.push_str(&format!(
            "# params: epoch_length={} gamma={:e} beta={:e} p={} threshold={}\n",
            p.epoch_length, p.gamma, p.beta, p.p, p.finality_threshold
        ));
        match self.meta.fault_epoch {
            Some(e) => out.push_str(&format!("# fault_epoch: {e}\n")),
            None => out.push_str("# fault_epoch: none\n"),
        }
        match &self.recovery {
            Some(r) => out.push_str(&format!(
                "# recovery: epoch={} since_fault={} seconds={:.3}\n",
                r.epoch, r.since_fault, r.seconds
            )),
            None => out.push_str("# recovery: never\n"),
        }
        out.push_str("branch,epoch,seconds,total_deposit,voted_fraction,esf,rho,justified,finalized\n");
        let mut rows: Vec<&TraceRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| (r.branch, r.epoch));
        for r in rows {
            out.push_str(&format!(
                "{},{},{:.3},{:.6},{:.6},{},{:e},{},{}\n",
                r.branch,
                r.epoch,
                r.seconds,
                r.total_deposit,
                r.voted_fraction,
                r.esf,
                r.rho,
                r.justified as u8,
                r.finalized as u8
            ));
        }
        out
    }
}
