//! `wavefront`: minimal speeds, wave profiles and lattice simulations for
//! delayed nonlocal lattice equations described by TOML model files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "wavefront", version, about = "Travelling wavefronts of delayed lattice equations")]
pub struct Cli {
    /// Model definition (TOML).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Profile grid spacing (1/m for an integer m >= 2).
    #[arg(long, global = true)]
    pub grid_spacing: Option<f64>,
    /// Profile half-length L (grid covers [-L, L]).
    #[arg(long, global = true)]
    pub half_length: Option<f64>,
    /// Iteration stopping tolerance relative to K.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomised property checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal wave speed c* and the double root λ*.
    Speed {
        /// Sweep a parameter, e.g. `tau=0:2:5` (start:end:points).
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Characteristic roots λ₁ < λ₂ and υ at a given speed.
    Roots {
        #[arg(long)]
        c: f64,
    },
    /// Wave profile by monotone iteration, with verification.
    Profile {
        /// Wave speed; omitted means the minimal speed.
        #[arg(long)]
        c: Option<f64>,
        /// Force the continuation toward the minimal speed.
        #[arg(long)]
        critical: bool,
    },
    /// Direct lattice simulation and front-speed measurement.
    Simulate {
        #[arg(long, value_enum, default_value_t = Initial::Step)]
        initial: Initial,
        #[arg(long, default_value_t = 1200)]
        sites: usize,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Site of the initial front (default: 100 sites from the right end).
        #[arg(long)]
        at: Option<f64>,
        /// Profile initial data travels at this multiple of c*.
        #[arg(long, default_value_t = 1.5)]
        speed_factor: f64,
        /// Constant initial data as a fraction of K.
        #[arg(long, default_value_t = 1.0)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Policy::Frozen)]
        policy: Policy,
        /// Write a snapshot row every this many steps (0 disables).
        #[arg(long, default_value_t = 0)]
        snapshot_every: usize,
    },
    /// Speed, profiles at 1.1c* and 1.5c*, a simulation and randomised
    /// operator checks, collected into one dossier.
    Verify {
        #[arg(long, default_value_t = 1200)]
        sites: usize,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        /// Randomised order-preservation pairs.
        #[arg(long, default_value_t = 20)]
        pairs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Initial {
    Step,
    Profile,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Frozen,
    Equilibrium,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

impl Failure {
    /// Stable exit codes: 2 validation, 3 convergence, 4 verification, 5 simulation.
    pub fn code(&self) -> u8 {
        use wavefront_core::Error as E;
        match self {
            Failure::Validation(_) => 2,
            Failure::Verification(_) => 4,
            Failure::Core(e) => match e {
                E::Convergence(_) | E::OrderViolation { .. } => 3,
                E::Stability { .. } | E::Boundary { .. } => 5,
                _ => 2,
            },
        }
    }
}
