//! `bergman`: experiment runner for Bergman kernels, orbit counts and the
//! inequalities behind the sup-norm bounds.

mod commands;
mod config;
mod error;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "bergman", version, about = "Bergman kernel and sup-norm bound experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format [default: json]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; defaults to $BERGMAN_OUTPUT_DIR/<table>.<ext>, else stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// TOML file with default parameters
    #[arg(long, global = true, env = "BERGMAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bergman kernel values, ratio series, sup-norm scans and basis export
    Bergman(BergmanArgs),
    /// Heat-kernel, orbit-sum, lattice-sum and unit-sum bounds
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// Orbit enumeration, counting and the JL inequality
    Orbits {
        #[command(subcommand)]
        which: OrbitsCommand,
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Mass equidistribution and dimension consistency
    Que(QueArgs),
}

#[derive(Debug, Args)]
pub struct BergmanArgs {
    /// Weight
    #[arg(long)]
    pub k: Option<u32>,
    /// Weight range start:end:step (inclusive)
    #[arg(long)]
    pub series: Option<String>,
    /// Point: i, 2i, 0.3+1.5i or x,y
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Scan for sup B_k over the fundamental domain instead of evaluating
    #[arg(long)]
    pub sup: bool,
    /// Scan grid nx,ny,y_max
    #[arg(long)]
    pub grid: Option<String>,
    /// Export the orthonormal basis with this many q-coefficients
    #[arg(long)]
    pub export: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// ∫_ρ^∞ r e^{-r/2}/√(cosh r − cosh ρ) dr against 2√2 e^{-ρ}
    HeatIntegral {
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
    /// Heat-kernel upper bound against its simplified form
    HeatChain {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
    /// (36 + 1/sinh²(r/4))^d ∏ k_j
    Type1 {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u32>>,
        #[arg(long)]
        rinj: Option<f64>,
    },
    /// Type (1) part plus the cusp-stabilizer part
    Type2 {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u32>>,
        #[arg(long)]
        rinj: Option<f64>,
        /// Heights y_j (one per weight)
        #[arg(long, value_delimiter = ',')]
        y: Option<Vec<f64>>,
        /// Use y_j = c·k_j
        #[arg(long)]
        sup_c: Option<f64>,
    },
    /// Lattice sum over O_F on random samples
    Auxlemma {
        #[arg(long = "D", alias = "d")]
        d: Option<i64>,
        /// Weights k1,k2; random from {2,4,6} when absent
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u32>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lattice_radius: Option<f64>,
    },
    /// Σ over units of ∏ 2y_j/(1 + ε_j²) against ∏ 2πy_j
    UnitSum {
        #[arg(long = "D", alias = "d")]
        d: Option<i64>,
        /// Heights y1,y2; random in [0.5, 4] when absent
        #[arg(long, value_delimiter = ',')]
        y: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// T1, T2, T3 of the orbit-sum bound against their ceilings
    TTerms {
        #[arg(long, value_delimiter = ',')]
        rinj: Option<Vec<f64>>,
        /// Split point; defaults to 3r/4
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Γ(k − 1/2)/Γ(k) three ways
    Gamma {
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u32>>,
    },
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// full, or gammaN for the principal congruence subgroup of level N
    #[arg(long, global = true)]
    pub group: Option<String>,
    /// Keep parabolic elements
    #[arg(long, global = true)]
    pub keep_parabolic: bool,
    /// Largest radius accepted
    #[arg(long, global = true)]
    pub cap: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum OrbitsCommand {
    /// Elements with d(z, γz) ≤ R, sorted
    Enum {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// N(z; ρ) at the given ρ values
    Count {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
    /// Minimum displacement over a fundamental-domain grid
    Inj {
        /// nx,ny
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        y_top: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Σ e^{−2ρ} plus tail against the JL bound and 9 + 1/(4sinh²(r/4))
    Jl {
        /// nx,ny base-point grid
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        y_top: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        /// Multiplier applied to the measured injectivity radius
        #[arg(long)]
        safety: Option<f64>,
        /// Injectivity radius; measured on the grid when absent
        #[arg(long)]
        rinj: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct QueArgs {
    /// x0,x1,y0,y1
    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,
    #[arg(long)]
    pub full_domain: bool,
    /// Report ∫ B_k dμ against dim S_k instead
    #[arg(long)]
    pub dimension: bool,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u32>>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let format = cli.global.format.or(file.format).unwrap_or(Format::Json);
    let output = cli.global.output.clone().or_else(|| file.output.clone());
    if let Some(n) = cli.global.workers.or(file.workers) {
        if n == 0 {
            return Err(CliError::invalid("--workers must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(e.to_string()))?;
    }
    let table = commands::dispatch(&cli.command, &file)?;
    output::emit(&table, format, output.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
