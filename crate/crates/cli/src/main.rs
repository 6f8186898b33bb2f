//! `kslab` command-line driver.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kslab::profiles::Frame;
use kslab::Error;

#[derive(Parser)]
#[command(name = "kslab", version, about = "Keller-Segel numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run settings: a flat `key = value` file plus overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub dimension: Option<usize>,
    /// free or rescaled.
    #[arg(long)]
    pub frame: Option<String>,
    /// spectral or physical.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time between recorded diagnostics.
    #[arg(long)]
    pub cadence: Option<f64>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Pointwise,
    Transport,
    Newton,
    Obstruction,
    Loghls,
    Confined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Free,
    Rescaled,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::Free => Frame::Free,
            FrameArg::Rescaled => Frame::Rescaled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write diagnostics, snapshots and a manifest.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
    },
    /// Solve for the self-similar profile and report its residuals.
    Profile {
        #[arg(long)]
        chi: f64,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, default_value_t = 512)]
        cells: usize,
        /// `L` in 1D, `R` in the radial case. Defaults to 10 and 8.
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long, default_value = "profile")]
        out_dir: PathBuf,
    },
    /// Compare two density CSVs, or the first and last snapshot of a run.
    Metrics {
        #[arg(required = true, num_args = 1..=2)]
        inputs: Vec<PathBuf>,
        /// Coupling used for the free energies.
        #[arg(long, default_value_t = 1.0)]
        chi: f64,
        #[arg(long, value_enum, default_value_t = FrameArg::Free)]
        frame: FrameArg,
        /// Frequency box for d1 (1D only).
        #[arg(long, default_value_t = 8.0)]
        freq_max: f64,
        #[arg(long, default_value_t = 256)]
        modes: usize,
        #[arg(long, default_value = "metrics")]
        out_dir: PathBuf,
    },
    /// Run inequality checks; exit status 1 if any verdict fails.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Samples per pointwise lemma.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value = "verify")]
        out_dir: PathBuf,
    },
    /// Fit exponential decay rates to a run's distances to the profile.
    Rates {
        run_dir: PathBuf,
        /// Fit window; defaults to the middle half of the run.
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        window: Option<Vec<f64>>,
        /// Defaults to the run directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run one simulation per coupling and tabulate blow-up times.
    BlowupScan {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated couplings.
        #[arg(long, value_delimiter = ',', default_values_t = [1.1, 1.25, 1.5, 2.0])]
        chis: Vec<f64>,
        #[arg(long, default_value = "blowup-scan")]
        out_dir: PathBuf,
    },
}

/// Outcome of a command that completed without error.
pub enum Outcome {
    Success,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { run, out_dir } => commands::simulate(&run, &out_dir),
        Command::Profile {
            chi,
            dimension,
            cells,
            half_width,
            out_dir,
        } => commands::profile(chi, dimension, cells, half_width, &out_dir),
        Command::Metrics {
            inputs,
            chi,
            frame,
            freq_max,
            modes,
            out_dir,
        } => commands::metrics(&inputs, chi, frame.into(), freq_max, modes, &out_dir),
        Command::Verify {
            suite,
            seed,
            trials,
            out_dir,
        } => commands::verify(suite, seed, trials, &out_dir),
        Command::Rates {
            run_dir,
            window,
            out_dir,
        } => {
            let window = window.map(|w| (w[0], w[1]));
            commands::rates(&run_dir, window, out_dir.as_deref().unwrap_or(&run_dir))
        }
        Command::BlowupScan { run, chis, out_dir } => commands::blowup_scan(&run, &chis, &out_dir),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                _ => 3,
            })
        }
    }
}
