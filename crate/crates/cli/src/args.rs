use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "spectral-plane",
    version,
    about = "Period planes of degenerating trigonal spectral curves"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// u, v at t = 0 (closed form) or on a single-axis deformation (oracle).
    Eval(EvalArgs),
    /// Derivative table, N = CB − DA and det N at t = 0.
    Jacobian(JacobianArgs),
    /// Closed forms against the elliptic oracle.
    Verify(VerifyArgs),
    /// h along the probe curves toward infinity.
    Asymptote(AsymptoteArgs),
    /// det N over a grid of angles.
    Scan(ScanArgs),
    /// Search for parameters with a rational period plane.
    Hunt(HuntArgs),
    /// Re-check candidates from a hunt.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Auto,
    Linearized,
    ExactElliptic,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "SPECTRAL_PLANE_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Absolute tolerance of contour quadrature.
    #[arg(long, default_value_t = 1e-11)]
    pub quad_tol: f64,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Genus; must match the number of angles when both are given.
    #[arg(long)]
    pub g: Option<usize>,
    /// Angles θ₁ < … < θ_g in (0, 2π/3), comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "config"
    )]
    pub theta: Option<Vec<f64>>,
    /// Deformation parameters t₁, …, t_g, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Option<Vec<f64>>,
    /// JSON file with fields g, theta and optionally t, t_max, gap_margin.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct JacobianArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Take the t-columns from oracle finite differences.
    #[arg(long)]
    pub fd: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AsymptoteArgs {
    #[arg(long)]
    pub g: usize,
    /// Use the symmetric probe z_m = z^m, z_{p+m} = −z^m (g = 2p).
    #[arg(long)]
    pub lagrangian: bool,
    /// Probe radii, increasing and at least 10.
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub radii: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub g: usize,
    /// Points per axis.
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    /// Per-axis ranges lo:hi, comma separated; defaults to the chart minus
    /// the gap margin.
    #[arg(long, value_delimiter = ',')]
    pub r#box: Option<Vec<String>>,
    /// Keep only cells with |det N| above this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HuntArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Largest denominator of a target entry.
    #[arg(long, default_value_t = 64)]
    pub qmax: i64,
    /// Per-entry search radius around the graph form of W(0, θ).
    #[arg(long, default_value_t = 1e-2)]
    pub radius: f64,
    /// Number of targets tried.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    /// Acceptance threshold on the distance to the target plane.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Auto)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// JSON file with one candidate or an array of them.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Factor by which the quadrature tolerance is tightened.
    #[arg(long, default_value_t = 10.0)]
    pub tighten: f64,
    #[command(flatten)]
    pub common: Common,
}
