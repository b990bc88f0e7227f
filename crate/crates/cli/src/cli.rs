use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "flowweld", version, about = "Dense-flow garment warping with neighborhood integrity preservation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene directory.
    Synth(SynthArgs),
    /// Warp an image by a flow and optionally mask it.
    Warp(WarpArgs),
    /// Run the global and local stages on a scene.
    Optimize(RunArgs),
    /// Run the SO and NIPR variants side by side.
    Compare(RunArgs),
    /// Check every analytic adjoint against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// scale, tuckin, hand or identity.
    #[arg(value_name = "SCENARIO")]
    pub name: Option<String>,
    #[arg(long = "scenario", value_name = "SCENARIO", conflicts_with = "name")]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub sy: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sx: f64,
    /// Fraction of the garment height tucked under the bottom garment.
    #[arg(long, default_value_t = 0.25)]
    pub crop: f64,
    #[arg(long)]
    pub band_top: Option<usize>,
    #[arg(long)]
    pub band_left: Option<usize>,
    #[arg(long)]
    pub band_height: Option<usize>,
    #[arg(long)]
    pub band_width: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 48)]
    pub width: usize,
    /// Stripe period in pixels.
    #[arg(long, default_value_t = 4)]
    pub period: usize,
    /// horizontal, vertical or checker.
    #[arg(long, default_value = "horizontal")]
    pub pattern: String,
    /// Recorded in the provenance; scenes are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    pub image: PathBuf,
    pub flow: PathBuf,
    /// Visibility mask; output is multiplied by `1 - vis`.
    #[arg(long)]
    pub vis: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scene: PathBuf,
    /// Flat `key = value` file; missing keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Flat `key = value` file with `samples`, `h`, `tol` and `seed`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Doubles the named operation's adjoint.
    #[arg(long, value_name = "OP")]
    pub inject_fault: Option<String>,
    /// Writes the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
