use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coflow_core::dynamics::Flavor;
use coflow_core::forms::Orientation;
use coflow_core::scalar::{parse_scalar, Scalar};

#[derive(Debug, Parser)]
#[command(name = "coflow", version, about = "Co-flows of G2-structures on 3-Sasakian manifolds")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the exact identity suite at random rational parameter points
    Verify(VerifyArgs),
    /// Integrate a flow and write the trajectory
    Flow(FlowArgs),
    /// Linearize at a nearly-G2 critical point and report its spectrum
    Stability(StabilityArgs),
    /// Multiplicity table and index lower bound on the round 7-sphere
    SphereIndex(SphereArgs),
}

fn parse_flavor(s: &str) -> Result<Flavor, String> {
    s.parse()
}

fn parse_eps(s: &str) -> Result<Orientation, String> {
    s.parse()
}

fn parse_exact(s: &str) -> Result<Scalar, String> {
    parse_scalar(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    /// RNG seed (COFLOW_SEED takes precedence)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per orientation
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Worker threads
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Print the JSON report instead of one line per identity
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Perturb {
    /// Along the unstable eigenvector of the τ₀ = κ point
    Unstable,
    /// Along the slowest stable eigenvector of the τ₀ = κ point
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F64,
    DoubleDouble,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FlowArgs {
    #[arg(long, value_parser = parse_flavor, default_value = "coflow")]
    pub flavor: Flavor,
    #[arg(long, value_parser = parse_eps, default_value = "-1")]
    pub eps: Orientation,
    #[arg(long, default_value_t = 4.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, requires_all = ["b0", "c0"], conflicts_with = "perturb")]
    pub a0: Option<f64>,
    #[arg(long, requires_all = ["a0", "c0"])]
    pub b0: Option<f64>,
    #[arg(long, requires_all = ["a0", "b0"])]
    pub c0: Option<f64>,
    /// Start at the τ₀ = κ critical point moved along an eigenvector
    #[arg(long, value_enum, requires = "delta")]
    pub perturb: Option<Perturb>,
    /// Distance of the perturbed start from the critical point
    #[arg(long)]
    pub delta: Option<f64>,
    /// Stop once the state leaves this ball around the critical point
    /// (defaults to 0.1 with --perturb unstable)
    #[arg(long)]
    pub escape: Option<f64>,
    /// Stop once the state enters this ball around the critical point
    #[arg(long)]
    pub capture: Option<f64>,
    #[arg(long, default_value_t = 1e3)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: usize,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
    /// Trajectory CSV; the sidecar goes next to it with a .json extension
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Label {
    /// τ₀ = κ
    Kappa,
    /// τ₀ = (γ − 1)κ (modified flow only)
    GammaMinusOne,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct StabilityArgs {
    #[arg(long, value_parser = parse_flavor, default_value = "modified")]
    pub flavor: Flavor,
    #[arg(long, value_parser = parse_eps, default_value = "+1")]
    pub eps: Orientation,
    #[arg(long, value_parser = parse_exact, default_value = "4")]
    pub kappa: Scalar,
    #[arg(long, value_parser = parse_exact, default_value = "3")]
    pub gamma: Scalar,
    #[arg(long, value_enum, default_value = "kappa")]
    pub label: Label,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SphereArgs {
    #[arg(long, default_value_t = 3)]
    pub l_min: u32,
    #[arg(long, default_value_t = 6)]
    pub l_max: u32,
    #[arg(long, value_parser = parse_exact, default_value = "3")]
    pub gamma: Scalar,
    /// Append the flagged displayed closed form as an extra column
    #[arg(long)]
    pub with_closed_form: bool,
    /// CSV destination; `-` for stdout (the sum then goes to stderr)
    #[arg(long)]
    pub out: Option<PathBuf>,
}
