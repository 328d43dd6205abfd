use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bdfd", version, about = "Semi-explicit BDF-k experiments for elliptic-parabolic systems")]
pub struct Cli {
    /// Seed of the random identity battery.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the multiplier systems on a μ grid and write the spectra of G(μ).
    Gstability(GstabilityArgs),
    /// Temporal convergence study for the spectral or Biot problem.
    Converge(ConvergeArgs),
    /// Growth of the advanced-type delay example with the history frequency n.
    DdeDemo(DdeArgs),
    /// Estimate the coupling strength of a problem and list certified orders.
    Coupling(CouplingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Spectral,
    Biot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeChoice {
    Semi,
    Mono,
    Both,
}

#[derive(Debug, Args)]
pub struct GstabilityArgs {
    /// BDF order.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub k: u8,
    /// Multiplier parameter η (default 0 for k = 1, 2 and 0.12 for k = 3).
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Number of grid points on [0, threshold − 1e-3].
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    #[arg(long, value_enum, default_value_t = SchemeChoice::Semi)]
    pub scheme: SchemeChoice,
    /// BDF orders, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub k: Vec<u8>,
    /// Delay count applied to every k (default: δ = k).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub delta: Option<u8>,
    /// Step sizes as "start:count", halving from start.
    #[arg(long)]
    pub taus: Option<String>,
    /// Cells per side of the Biot mesh.
    #[arg(long, default_value_t = 32)]
    pub mesh: usize,
    /// JSON parameter file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DdeArgs {
    /// History frequencies, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub n_list: Vec<u32>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y0: f64,
    /// Grid points per unit interval of the method of steps.
    #[arg(long, default_value_t = 4000)]
    pub inner_steps: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CouplingArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// Cells per side of the Biot mesh.
    #[arg(long, default_value_t = 32)]
    pub mesh: usize,
    /// Coupling values μ_i of the spectral problem, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// JSON parameter file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
