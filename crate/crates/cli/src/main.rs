//! `nanofiber`: simulate and fit single-atom fluorescence through an
//! optical nanofiber.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nanofiber_core::error::Error;

#[derive(Debug, Parser)]
#[command(name = "nanofiber", version, about = "Single-atom nanofiber fluorescence: spectra, photon correlations, Monte-Carlo streams and fits")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Master seed for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady-state excitation spectrum as CSV (detuning_MHz,signal).
    Spectrum(SpectrumArgs),
    /// Analytic intensity correlation g2(tau) as CSV (delay_ns,g2).
    G2(G2Args),
    /// Monte-Carlo HBT experiment; writes the coincidence histogram CSV.
    Hbt(HbtArgs),
    /// Monte-Carlo delayed-gate dwell-time scan (delay_us,counts).
    Decay(DecayArgs),
    /// Stationary orbits of a trapped atom around a charged surface feature.
    Orbit(OrbitArgs),
    /// Fit a model to a CSV file; prints JSON.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Back-of-envelope estimates; prints JSON.
    #[command(subcommand)]
    Estimate(EstimateCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpectrumModel {
    TwoLevel,
    Vtype,
    VdwSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmitterModel {
    TwoLevel,
    Vtype,
}

/// Drive and scheme overrides shared by several commands.
#[derive(Debug, Args)]
struct DriveArgs {
    /// Rabi frequency, MHz.
    #[arg(long)]
    rabi: Option<f64>,
    /// Probe intensity, mW/cm^2 (converted with --rabi-scale).
    #[arg(long, conflicts_with = "rabi")]
    intensity: Option<f64>,
    #[arg(long)]
    rabi_scale: Option<f64>,
    /// Drive detuning, MHz.
    #[arg(long, allow_hyphen_values = true)]
    detuning: Option<f64>,
    /// Upper-level spacing of the V-type scheme, MHz.
    #[arg(long)]
    delta_split: Option<f64>,
    /// Cross-damping parameter of the V-type scheme.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputArg {
    /// Output file (stdout when absent).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, value_enum, default_value = "two-level")]
    model: SpectrumModel,
    #[command(flatten)]
    drive: DriveArgs,
    /// Grid start, MHz.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Grid end, MHz.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Closest atom-surface distance for vdw-surface, nm.
    #[arg(long)]
    d_min: Option<f64>,
    /// Farthest atom-surface distance for vdw-surface, nm.
    #[arg(long)]
    d_max: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct G2Args {
    #[arg(long, value_enum, default_value = "two-level")]
    model: EmitterModel,
    #[command(flatten)]
    drive: DriveArgs,
    /// ns.
    #[arg(long, default_value_t = 200.0)]
    max_delay: f64,
    /// ns.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct HbtArgs {
    #[command(flatten)]
    drive: DriveArgs,
    /// Acquisition time, us.
    #[arg(long)]
    duration: Option<f64>,
    /// Hold exactly this many atoms in view for the whole run.
    #[arg(long, value_name = "N")]
    mean_atoms: Option<u32>,
    /// Probe continuously instead of using the loading cycle.
    #[arg(long)]
    continuous: bool,
    #[arg(long)]
    efficiency: Option<f64>,
    /// ns.
    #[arg(long)]
    bin_width: Option<f64>,
    /// ns.
    #[arg(long)]
    max_delay: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct DecayArgs {
    #[arg(long)]
    cycles: Option<u64>,
    /// Rabi frequency during the probe, MHz.
    #[arg(long)]
    rabi: Option<f64>,
    /// Mean dwell time, us.
    #[arg(long)]
    dwell: Option<f64>,
    /// Mean number of atoms in view at the start of a probe window.
    #[arg(long)]
    occupancy: Option<f64>,
    #[arg(long)]
    efficiency: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    /// Angular momentum in units of hbar.
    #[arg(long = "L", short = 'L', value_name = "L")]
    l: Option<f64>,
    /// Number of log-spaced L values between --l-min and --l-max.
    #[arg(long = "sweep-l", alias = "sweep-L", value_name = "N")]
    sweep: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    l_min: f64,
    #[arg(long, default_value_t = 500.0)]
    l_max: f64,
    /// Convert an observed frequency (MHz) to a radius using the configured
    /// radius mode or --r-ref/--nu-ref.
    #[arg(long)]
    frequency: Option<f64>,
    /// Anchor radius, nm.
    #[arg(long, requires = "nu_ref")]
    r_ref: Option<f64>,
    /// Anchor frequency, MHz.
    #[arg(long, requires = "r_ref")]
    nu_ref: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Subcommand)]
enum FitCommand {
    /// A exp(-t/tau) + B to `delay_us,counts` data.
    #[command(alias = "exponential")]
    Exp {
        /// CSV file, or - for stdin.
        #[arg(default_value = "-")]
        input: PathBuf,
        #[command(flatten)]
        out: OutputArg,
    },
    /// N-atom coincidence model to a `delay_ns,counts` histogram.
    Coincidences {
        #[arg(default_value = "-")]
        input: PathBuf,
        /// Known flat background per bin; makes N identifiable.
        #[arg(long)]
        background: Option<f64>,
        /// Atom numbers to try, e.g. 0,1,2,3.
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<u32>>,
        /// Starting Rabi frequency, MHz.
        #[arg(long)]
        rabi_guess: Option<f64>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// V-type spectrum model to `detuning_MHz,signal` data.
    Vtype {
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        delta_guess: Option<f64>,
        #[arg(long)]
        rabi_guess: Option<f64>,
        /// Cross-damping parameter held fixed in the model.
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(Debug, Subcommand)]
enum EstimateCommand {
    /// Mean atom number in the detection shell.
    Atoms {
        /// Atom density, cm^-3.
        #[arg(long)]
        density: f64,
        /// Observation length, um.
        #[arg(long)]
        length: Option<f64>,
    },
    /// Transit time through a length at a speed.
    Transit {
        /// cm/s.
        #[arg(long)]
        speed: f64,
        /// um.
        #[arg(long, default_value_t = 1.0)]
        length: f64,
    },
    /// Number of atoms from integrated intensities (two spectrum CSVs).
    Localized { many: PathBuf, single: PathBuf },
}

/// A failed run: `Usage` for bad input or configuration (exit 2),
/// `Numerical` for a computation that did not succeed (exit 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::InvalidParameter { .. } | Error::Data(_) | Error::Csv(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
