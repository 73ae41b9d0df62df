//! `consips` command-line front end.
//!
//! Exit codes: 0 success; 1 acceptance or verification failure (or any
//! other runtime error); 2 inconsistent rates; 3 absorption unreachable;
//! 4 truncation not certified; 64 malformed model file.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INCONSISTENT: u8 = 2;
pub const EXIT_UNREACHABLE: u8 = 3;
pub const EXIT_UNCERTIFIED: u8 = 4;
pub const EXIT_MALFORMED: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "consips", version, about = "Consistent interacting particle systems: exact solves, duality and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long, global = true, env = "CONSIPS_MODEL")]
    pub model: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true, env = "CONSIPS_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "CONSIPS_SEED", default_value_t = 20_240_917)]
    pub seed: u64,
    /// Overrides every numeric tolerance.
    #[arg(long, global = true, env = "CONSIPS_TOL")]
    pub tol: Option<f64>,
    #[arg(long, global = true, env = "CONSIPS_FORMAT", value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the consistent rate form and check commutation with annihilation.
    Check {
        /// Largest particle number for the commutator check.
        #[arg(long, default_value_t = 3)]
        max_n: u32,
        /// Rate-table window in (κ, m).
        #[arg(long)]
        window: Option<u32>,
        /// Also run the statistical consistency test from this start (site labels).
        #[arg(long, value_delimiter = ',')]
        statistical: Option<Vec<i64>>,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long, env = "CONSIPS_REPLICAS", default_value_t = 100_000)]
        replicas: usize,
    },
    /// Absorption distribution from a start configuration.
    Absorb {
        #[command(flatten)]
        start: StartArgs,
    },
    /// Absorbed-count generating function q(k) = P(k particles absorbed left).
    Genfun {
        #[command(flatten)]
        start: StartArgs,
    },
    /// Steady-state profile, covariances and correlation expansions.
    Ness {
        #[arg(long, value_enum, default_value_t = Method::Dual)]
        method: Method,
        /// Truncation level for `exact` on uncapped models.
        #[arg(long)]
        truncation: Option<u32>,
        /// Largest acceptable truncation certificate.
        #[arg(long, default_value_t = 1e-3)]
        cert_tol: f64,
        #[arg(long, env = "CONSIPS_REPLICAS", default_value_t = 64)]
        replicas: usize,
        /// Simulated time per replica for `mc`.
        #[arg(long, default_value_t = 400.0)]
        time: f64,
        #[arg(long, default_value_t = 40.0)]
        burn_in: f64,
        /// Batch length for `mc` batch means.
        #[arg(long, default_value_t = 20.0)]
        thinning: f64,
    },
    /// Gillespie histogram of final states.
    Simulate {
        /// Start configuration as site labels, one per particle.
        #[arg(long, value_delimiter = ',', required = true)]
        start: Vec<i64>,
        /// Horizon; runs to absorption when absent.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, env = "CONSIPS_REPLICAS", default_value_t = 100_000)]
        replicas: usize,
    },
    /// Run the acceptance criteria.
    Accept {
        /// Criterion numbers and/or tags, comma separated.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, env = "CONSIPS_REPLICAS", default_value_t = 100_000)]
        replicas: usize,
    },
}

#[derive(Debug, Args)]
pub struct StartArgs {
    /// Start configuration as site labels, one per particle.
    #[arg(long, value_delimiter = ',', required = true)]
    pub start: Vec<i64>,
    /// Exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Check the recursion and binomial-moment identities.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Dual,
    Mc,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
