//! `ffg`: scenario simulation and closed-form analysis from the command
//! line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on invalid scenarios or
//! out-of-domain arguments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use casper_ffg::analysis;
use casper_ffg::sim::{run_scenario, ProposalModel, ScenarioConfig, ValidatorConfig};
use casper_ffg::{ProtocolParams, Strategy};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Checkpoint-finality protocol simulator and analysis toolkit.
#[derive(Parser)]
#[command(name = "ffg", version, disable_help_subcommand = true)]
struct Cli {
    /// Output format (only CSV for now).
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv"])]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML scenario and emit its CSV trace.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted. Relative paths resolve under
        /// $CASPER_FFG_OUT_DIR when that is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the offline-recovery experiment over a grid of stake shares and
    /// seeds, one two-validator scenario per cell.
    Sweep {
        /// Offline stake shares to sweep.
        #[arg(long, required = true, num_args = 1..)]
        alpha: Vec<f64>,
        #[arg(long, default_values_t = [1u64], num_args = 1..)]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 3800)]
        max_epochs: u64,
        #[arg(long, default_value_t = 1e7)]
        d0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epochs until finalization resumes after a stake share goes offline.
    Phi {
        /// Offline stake share; repeatable for a table.
        #[arg(long, required = true, num_args = 1..)]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1e7)]
        d0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epochs until finalization resumes against the worst-case adversary.
    WorstCase {
        /// Honest (consistently voting) stake share; repeatable.
        #[arg(long, required = true, num_args = 1..)]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1e7)]
        d0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that the first chain wins the partition block race.
    Race {
        #[arg(long)]
        n1: u64,
        #[arg(long)]
        n2: u64,
        /// Mining share of the first chain; repeatable for a curve.
        #[arg(long, required = true, num_args = 1..)]
        mu: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mining share at which the partition race is even.
    Breakeven {
        #[arg(long)]
        n1: u64,
        #[arg(long)]
        n2: u64,
    },
    /// Single-epoch abstention incentive tables.
    Tables {
        /// Stake share of the abstaining validator.
        #[arg(long)]
        alpha: f64,
        /// Combined stake share of all voters including the abstainer.
        #[arg(long)]
        mu: f64,
        /// Individual reward factor for the epoch.
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Share of the block gas limit consumed by votes and epoch setup.
    Gas {
        #[arg(long)]
        validators: u64,
        #[arg(long, default_value_t = 532_031.0)]
        vote_gas: f64,
        #[arg(long, default_value_t = 742_393.0)]
        init_gas: f64,
        #[arg(long, default_value_t = 8e6)]
        block_gas_limit: f64,
        #[arg(long, default_value_t = 50)]
        epoch_length: u64,
        /// Trailing blocks of the epoch that carry votes.
        #[arg(long, default_value_t = 37)]
        vote_window: u64,
    },
    /// Compounded yearly interest for a consistently voting validator.
    Interest {
        #[arg(long, default_value_t = 1e7)]
        deposit: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, everything else is
            // a usage error.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    let params = ProtocolParams::default();
    match command {
        Command::Simulate { scenario, seed, out } => {
            let mut config = ScenarioConfig::from_path(&scenario).map_err(|e| e.to_string())?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let trace = run_scenario(&config).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &trace.to_csv())
        }
        Command::Sweep {
            alpha,
            seeds,
            max_epochs,
            d0,
            out,
        } => {
            let mut rows: Vec<(f64, u64, String)> = Vec::new();
            for &a in &alpha {
                if !(a > 0.0 && a < 1.0) {
                    return Err(format!("offline share {a} outside (0, 1)"));
                }
                let expected = analysis::phi(a, &params, d0).map_err(|e| e.to_string())?;
                for &seed in &seeds {
                    let config = offline_scenario(a, seed, max_epochs, d0, &params);
                    let trace = run_scenario(&config).map_err(|e| e.to_string())?;
                    let (recovered, seconds) = match trace.recovery {
                        Some(r) => (r.since_fault.to_string(), format!("{:.3}", r.seconds)),
                        None => ("never".into(), "never".into()),
                    };
                    rows.push((a, seed, format!("{a},{seed},{recovered},{expected},{seconds}")));
                }
            }
            rows.sort_by(|x, y| x.partial_cmp(y).expect("finite keys"));
            let mut csv =
                String::from("alpha,seed,recovery_epochs,analysis_epochs,recovery_seconds\n");
            for (_, _, row) in rows {
                csv.push_str(&row);
                csv.push('\n');
            }
            emit(out.as_deref(), &with_header("sweep", &csv))
        }
        Command::Phi { alpha, d0, out } => {
            let csv = analysis::phi_curve_csv(&alpha, &params, d0).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &with_header("phi", &csv))
        }
        Command::WorstCase { alpha, d0, out } => {
            let mut csv = String::from("honest_share,recovery_epochs\n");
            for &a in &alpha {
                let t = analysis::worst_case_recovery(a, &params, d0).map_err(|e| e.to_string())?;
                csv.push_str(&format!("{a},{t}\n"));
            }
            emit(out.as_deref(), &with_header("worst-case", &csv))
        }
        Command::Race { n1, n2, mu, out } => {
            let csv = analysis::race_curve_csv(n1, n2, &mu).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &with_header("race", &csv))
        }
        Command::Breakeven { n1, n2 } => {
            if n1 < 1 || n2 < 1 {
                return Err("block counts must be >= 1".into());
            }
            println!("{}", analysis::mu_breakeven(n1, n2));
            Ok(())
        }
        Command::Tables {
            alpha,
            mu,
            rho,
            out,
        } => {
            let csv = analysis::incentive_tables_csv(alpha, mu, rho).map_err(|e| e.to_string())?;
            emit(out.as_deref(), &with_header("tables", &csv))
        }
        Command::Gas {
            validators,
            vote_gas,
            init_gas,
            block_gas_limit,
            epoch_length,
            vote_window,
        } => {
            if vote_window >= epoch_length {
                return Err("vote window must be shorter than the epoch".into());
            }
            let (init, vote) = analysis::gas_overhead(
                validators,
                vote_gas,
                init_gas,
                block_gas_limit,
                epoch_length,
                vote_window,
            );
            println!("init_fraction,vote_fraction");
            println!("{init},{vote}");
            Ok(())
        }
        Command::Interest { deposit } => {
            if !(deposit > 0.0) {
                return Err("deposit must be positive".into());
            }
            println!("{}", analysis::annual_voter_interest(deposit, &params));
            Ok(())
        }
    }
}

/// The two-validator reduction of the offline experiment: the grouped
/// honest stake keeps voting, the offline group stops at epoch 2.
fn offline_scenario(
    offline_share: f64,
    seed: u64,
    max_epochs: u64,
    d0: f64,
    params: &ProtocolParams,
) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("sweep-offline-{offline_share}"),
        seed,
        max_epochs,
        stop_on_recovery: true,
        fault_epoch: None,
        params: params.clone(),
        proposal: ProposalModel::default(),
        validators: vec![
            ValidatorConfig {
                id: 0,
                deposit: (1.0 - offline_share) * d0,
                strategy: Strategy::Honest,
            },
            ValidatorConfig {
                id: 1,
                deposit: offline_share * d0,
                strategy: Strategy::Offline { from_epoch: 2 },
            },
        ],
        partition: None,
    }
}

fn with_header(command: &str, body: &str) -> String {
    format!("# ffg {VERSION}\n# command: {command}\n{body}")
}

/// Writes to the given path (resolved against $CASPER_FFG_OUT_DIR when
/// relative) or to stdout.
fn emit(out: Option<&Path>, content: &str) -> Result<(), String> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let resolved = match std::env::var_os("CASPER_FFG_OUT_DIR") {
                Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
                _ => path.to_path_buf(),
            };
            if let Some(parent) = resolved.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
                }
            }
            std::fs::write(&resolved, content).map_err(|e| e.to_string())
        }
    }
}
