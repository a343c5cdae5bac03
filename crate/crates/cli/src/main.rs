//! `tailselect`: list scenarios, compute rate-optimal allocations, trace a
//! single policy run, run PFS experiments and plot their curves.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "tailselect", version, about = "Select the alternative with the lightest loss tail")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in scenarios.
    Scenarios {
        /// Print the catalog as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Rate-optimal allocation for a set of tail indices.
    Rateopt {
        /// Comma-separated tail indices, e.g. `0.25,0.5,0.75`.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        betas: Option<String>,
        /// Use the true tail indices of a built-in scenario.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Run one policy and report its selection and allocation path.
    Trace {
        #[arg(long)]
        scenario: String,
        /// tiro, itiro, gj or static.
        #[arg(long)]
        policy: String,
        /// Sampling budget.
        #[arg(long = "T", value_name = "T")]
        budget: usize,
        /// RNG seed; `TAILSELECT_SEED` is used when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-batch trajectory as CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Rarity: a number, `pow:COEFF:EXP`, `mu+Cs` or `q:LEVEL`.
        #[arg(long)]
        nu: Option<String>,
        /// Risk measure for I-TIRO: tail_prob, excess_loss, var or cvar.
        #[arg(long, default_value = "tail_prob")]
        risk: String,
        /// Selection rule for the static policy.
        #[arg(long, default_value = "beta_hat")]
        rule: String,
        /// Warm-up samples per alternative.
        #[arg(long)]
        n0: Option<usize>,
        /// Batch size.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Run a PFS experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the CSV (keeps the configured file name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, overriding the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Plot harness CSV curves as SVG.
    Plot {
        #[arg(long = "in", value_name = "CSV")]
        input: PathBuf,
        #[arg(long, value_name = "SVG")]
        out: PathBuf,
        /// Logarithmic PFS axis; zero PFS is drawn at 1/(2 trials).
        #[arg(long)]
        logy: bool,
        /// Logarithmic budget axis.
        #[arg(long)]
        logx: bool,
    },
}

/// Failure classes, mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<tailselect::Error> for CliError {
    fn from(e: tailselect::Error) -> Self {
        use tailselect::Error as E;
        match e {
            E::InvalidParameter(_) | E::Config(_) | E::DimensionMismatch { .. } | E::MomentUndefined(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenarios { json } => commands::scenarios(json),
        Command::Rateopt { betas, scenario } => commands::rateopt(betas.as_deref(), scenario.as_deref()),
        Command::Trace { scenario, policy, budget, seed, trace_out, nu, risk, rule, n0, m } => {
            commands::trace(commands::TraceArgs { scenario, policy, budget, seed, trace_out, nu, risk, rule, n0, m })
        }
        Command::Experiment { config, out, workers } => commands::experiment(&config, out.as_deref(), workers),
        Command::Plot { input, out, logy, logx } => commands::plot(&input, &out, logy, logx),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
