use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "dephaskit",
    version,
    about = "Dephasing dynamics of a photon in a birefringent crystal: non-Markovianity experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate all criteria for each preset (or spectrum file) and write a verdict table.
    Classify,
    /// Sweep the width of a single-peak spectrum and locate the Markovian threshold.
    SweepSigma,
    /// Fit a one- or two-Gaussian mixture to a measured spectrum.
    Fit,
    /// Write κ, α, β, trace-distance, concurrence and mutual-information trajectories.
    Trajectory {
        /// Quantities to export (default: all).
        #[arg(long, value_enum, value_delimiter = ',')]
        quantities: Vec<Quantity>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Kappa,
    Alpha,
    Beta,
    TraceDistance,
    Concurrence,
    MutualInformation,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Kappa,
        Quantity::Alpha,
        Quantity::Beta,
        Quantity::TraceDistance,
        Quantity::Concurrence,
        Quantity::MutualInformation,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Quantity::Kappa => "kappa",
            Quantity::Alpha => "alpha",
            Quantity::Beta => "beta",
            Quantity::TraceDistance => "trace_distance",
            Quantity::Concurrence => "concurrence",
            Quantity::MutualInformation => "mutual_information",
        }
    }
}

/// Every flag is also a config-file key (dashes or underscores).
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Birefringence Δn of the crystal
    #[arg(long, global = true)]
    pub delta_n: Option<f64>,

    /// Reference wavelength λ0 in nm.
    #[arg(long, global = true)]
    pub lambda0: Option<f64>,

    /// Largest path difference s (units of λ0).
    #[arg(long, global = true)]
    pub s_max: Option<f64>,

    /// Grid spacing in s
    #[arg(long, global = true)]
    pub step: Option<f64>,

    /// Split point of the composite map, as a fraction of s
    #[arg(long, global = true)]
    pub t1_fraction: Option<f64>,

    /// Experimental resolution for the N criterion and the σ threshold.
    #[arg(long, global = true)]
    pub resolution: Option<f64>,

    /// Classical-process set (measure_prepare_ppt).
    #[arg(long, global = true)]
    pub formulation: Option<String>,

    /// Preset tilt angle; repeat or comma-separate for several.
    #[arg(long, global = true, value_delimiter = ',')]
    pub preset: Vec<String>,

    /// Spectrum file: CSV samples (`wavelength_nm,intensity`) or JSON from `fit`.
    #[arg(long, global = true)]
    pub spectrum: Option<PathBuf>,

    /// Output directory (default: $DEPHASKIT_OUT, else `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Mixture components used when fitting a CSV spectrum.
    #[arg(long, global = true)]
    pub components: Option<usize>,

    /// Sweep center wavelength in nm.
    #[arg(long, global = true)]
    pub center: Option<f64>,

    /// Largest σ of the sweep in nm
    #[arg(long, global = true)]
    pub sigma_max: Option<f64>,

    /// σ spacing of the sweep in nm
    #[arg(long, global = true)]
    pub sigma_step: Option<f64>,

    /// Replace every component width by this σ (nm).
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
}
