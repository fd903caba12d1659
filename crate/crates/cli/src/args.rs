use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smallworld::TieBreak;

/// Expected message delivery time in planar small-world networks.
///
/// Lengths (--R, --delta, --d, --d-grid, --node, --region) are in units of the
/// communication range r unless --absolute is given.
#[derive(Debug, Parser)]
#[command(name = "smallworld", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the continuum-limit curve g_k (no simulation).
    Analytic(AnalyticArgs),
    /// Monte Carlo estimate of the delivery time at one separation.
    Simulate(SimulateArgs),
    /// Monte Carlo estimates over a grid of separations, plus the analytic curve.
    Sweep(SweepArgs),
    /// Error against the continuum value as the relay count grows.
    Convergence(StudyArgs),
    /// Empirical P{tau_n > B} with B = floor(d/(r - delta)) + 1.
    Tail(StudyArgs),
    /// Check the long-range contact law against area ratios.
    #[command(name = "validate-lrc")]
    ValidateLrc(ValidateLrcArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct GeometryArgs {
    /// Domain side R [units of r; default 20]
    #[arg(long = "R", value_name = "LENGTH")]
    pub side: Option<f64>,
    /// Communication range r [absolute length; default 1]
    #[arg(long = "r", value_name = "LENGTH")]
    pub range: Option<f64>,
    /// Read every length in the same absolute unit as --r
    #[arg(long)]
    pub absolute: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file; written atomically. Defaults to stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat key=value file supplying defaults; flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Forwarding slack delta: local hops advance at least r - delta [units of r; default 0.1]
    #[arg(long, value_name = "LENGTH")]
    pub delta: Option<f64>,
    /// Master seed [default 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable long-range contacts
    #[arg(long)]
    pub no_lrc: bool,
    /// Choice among qualifying local contacts [default: uniform]
    #[arg(long, value_enum)]
    pub tie_break: Option<TieBreakArg>,
    /// Trials per cell (draws for validate-lrc) [count]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; results do not depend on it [count; default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relay counts, comma separated [count; default 2000]
    #[arg(long = "n", value_name = "N[,N...]")]
    pub relays: Option<String>,
    /// Source-target separation d [units of r]
    #[arg(long = "d", value_name = "LENGTH")]
    pub separation: Option<f64>,
    /// Write the first trial's instance and trajectory as JSON
    #[arg(long, value_name = "PATH")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relay counts, comma separated [count; default 2000]
    #[arg(long = "n", value_name = "N[,N...]")]
    pub relays: Option<String>,
    /// Separation grid start:stop:step [units of r; default 0:R/2-1:0.25]
    #[arg(long = "d-grid", value_name = "START:STOP:STEP")]
    pub d_grid: Option<String>,
    /// Only emit the analytic curve on the grid (no simulation)
    #[arg(long)]
    pub analytic_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relay counts, ascending, comma separated [count; default 500,2000,8000]
    #[arg(long = "n", value_name = "N[,N...]")]
    pub relays: Option<String>,
    /// Source-target separation d [units of r]
    #[arg(long = "d", value_name = "LENGTH")]
    pub separation: Option<f64>,
    /// Number of master seeds (seed, seed+1, ...) to take medians over [count; default 1]
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateLrcArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Relays per draw [count; default 1000]
    #[arg(long = "n", value_name = "N")]
    pub relays: Option<String>,
    /// Test node position x,y [units of r; default: domain centre]
    #[arg(long, value_name = "X,Y")]
    pub node: Option<String>,
    /// Test rectangle x0,y0,x1,y1; repeatable [units of r; default: 4 quadrants + one off-centre box]
    #[arg(long = "region", value_name = "X0,Y0,X1,Y1")]
    pub regions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    Uniform,
    MaxProgress,
}

impl From<TieBreakArg> for TieBreak {
    fn from(t: TieBreakArg) -> Self {
        match t {
            TieBreakArg::Uniform => TieBreak::Uniform,
            TieBreakArg::MaxProgress => TieBreak::MaxProgress,
        }
    }
}
