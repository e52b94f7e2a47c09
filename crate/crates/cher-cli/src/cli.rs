//! Argument surface; handlers live in `commands`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cher", version, about, max_term_width = 100)]
pub struct Cli {
    /// Output directory for artifacts; defaults to $CHER_OUT_DIR, then "."
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Root table of su(n) in the ladder numbering, as CSV
    Roots(RootsArgs),
    /// Dephasing factors of the exactly solvable bath models
    Factors(FactorsArgs),
    /// Invert a factor series into its frequency quasi-distribution
    Retrieve(RetrieveArgs),
    /// Distance from a stored quasi-distribution to the probability simplex
    Measure(MeasureArgs),
    /// Recover dephasing factors from a process-matrix series
    Chi(ChiArgs),
    /// Singlet-triplet free-induction tomography study
    St0(St0Args),
    /// Exact few-mode reference dynamics from a mode list
    Oracle(OracleArgs),
    /// Canned end-to-end runs
    Pipeline(PipelineArgs),
}

#[derive(Args)]
pub struct RootsArgs {
    /// System dimension n >= 2
    #[arg(long)]
    pub n: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// One qubit against an Ohmic bath
    Single,
    /// Two qubits sharing one Ohmic bath
    Pair,
}

#[derive(Args)]
pub struct FactorsArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Bath cutoff frequency (ignored when --spectral-table is given)
    #[arg(long, default_value_t = 1.0)]
    pub wc: f64,
    /// Bath temperature in cutoff units
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Overall coupling prefactor
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    /// Two-column CSV (omega,J) replacing the Ohmic form
    #[arg(long, value_name = "FILE")]
    pub spectral_table: Option<PathBuf>,
    /// End of the time grid; default 40/wc (single) or 39.375/wc (pair,
    /// which keeps the samples on the pair-transform lattice)
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of time samples; default 2048 (single) or 64 (pair)
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args)]
pub struct RetrieveArgs {
    /// Factor series CSV, as written by `factors`, `oracle`, or `chi`
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Bath cutoff for the correlated qubit-pair profile (dimension 4 only)
    #[arg(long)]
    pub wc: Option<f64>,
    /// Transform grid per axis for the pair profile
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Zero-padding factor for one-dimensional transforms
    #[arg(long, default_value_t = 2)]
    pub pad: usize,
    /// Largest |phi(T)| accepted without a taper window
    #[arg(long, default_value_t = 0.05)]
    pub tail_threshold: f64,
    /// Raised-cosine taper over this trailing fraction of the series
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Integrate the negative part directly
    Negativity,
    /// Solve the variational problem as a linear program
    LpOracle,
}

#[derive(Args)]
pub struct MeasureArgs {
    /// Quasi-distribution file, .csv or .json
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Negativity)]
    pub method: Method,
    /// Cell cap for the linear-program path
    #[arg(long, default_value_t = cher::nonclassicality::DEFAULT_LP_CAP)]
    pub lp_cap: usize,
}

#[derive(Args)]
pub struct ChiArgs {
    /// Process-matrix series JSON
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
}

#[derive(Args)]
pub struct St0Args {
    #[command(subcommand)]
    pub command: St0Command,
}

#[derive(Subcommand)]
pub enum St0Command {
    /// Simulate free-induction decay, fit the rotation axis, and recover
    /// the frequency distribution with a noise study
    Simulate(St0SimulateArgs),
}

#[derive(Args)]
pub struct St0SimulateArgs {
    /// Exchange splitting J in ueV
    #[arg(long, default_value_t = 0.37)]
    pub j: f64,
    /// Hyperfine field gradient in mT
    #[arg(long, default_value_t = 10.5)]
    pub db: f64,
    /// Inhomogeneous dephasing time in ns
    #[arg(long, default_value_t = 30.0)]
    pub t2star: f64,
    /// Electron g-factor
    #[arg(long, default_value_t = -0.44, allow_negative_numbers = true)]
    pub g: f64,
    /// Bohr magneton in ueV/T
    #[arg(long, default_value_t = 57.8)]
    pub mu_b: f64,
    /// Length of the sampled window in rotation periods
    #[arg(long, default_value_t = 10.0)]
    pub periods: f64,
    /// Number of time samples
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    /// Standard deviation of the added readout noise
    #[arg(long, default_value_t = 0.05)]
    pub noise_sigma: f64,
    /// Noisy repetitions averaged in the study
    #[arg(long, default_value_t = 200)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Mode list JSON with couplings, temperature, and method
    #[arg(long, value_name = "FILE")]
    pub modes: PathBuf,
    /// Override the method stored in the file:
    /// analytic-displacement or truncated-fock
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 8.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 129)]
    pub samples: usize,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[command(subcommand)]
    pub command: PipelineCommand,
}

#[derive(Subcommand)]
pub enum PipelineCommand {
    /// Two qubits on one Ohmic bath: factors, correlated two-axis
    /// inversion, and the measured value in one run
    PairOhmic(PairOhmicArgs),
    /// Sweep the coupling phase seen by a spectator qubit and measure
    /// the resulting single-qubit factor at each step
    PhaseSweep(PhaseSweepArgs),
}

#[derive(Args)]
pub struct PairOhmicArgs {
    #[arg(long, default_value_t = 1.0)]
    pub wc: f64,
    /// Transform grid per axis
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
}

#[derive(Args)]
pub struct PhaseSweepArgs {
    /// Mode list JSON; omitted, an eight-mode Ohmic discretization is used
    #[arg(long, value_name = "FILE")]
    pub modes: Option<PathBuf>,
    /// Sweep points over one full turn, endpoints included
    #[arg(long, default_value_t = 17)]
    pub steps: usize,
    /// Population of the spectator's upper sector
    #[arg(long, default_value_t = 0.5)]
    pub up_weight: f64,
    #[arg(long, default_value_t = 8.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 129)]
    pub samples: usize,
}

