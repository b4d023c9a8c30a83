use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdsq_core::io::{read_config, read_json, ConfigFile, RunManifest};
use fdsq_core::{Error, Result, TransferMode};

mod commands;

use commands::{execute, Params};

/// Frequency-dependent squeezed light simulator.
#[derive(Parser, Debug)]
#[command(name = "fdsq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Homodyne noise spectra (dB relative to shot noise) for a list of angles.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeFlags,
        #[command(flatten)]
        freq: FreqRange,
        /// Homodyne angles in degrees.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,10,20,30,40,50,60,70,80,90",
            allow_negative_numbers = true
        )]
        angles: Vec<f64>,
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
    },
    /// Squeezing-ellipse rotation versus frequency for +/- detuning.
    Rotation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        freq: FreqRange,
        #[arg(long, default_value = "rotation.csv")]
        out: PathBuf,
    },
    /// Simulated locked tomography at one sideband frequency.
    Tomo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeFlags,
        /// Sideband frequency (Hz).
        #[arg(long, default_value_t = 14.1e6)]
        f_hz: f64,
        /// Number of equidistant quadrature angles (default from config).
        #[arg(long)]
        n_angles: Option<usize>,
        /// Readings per angle (default from config).
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "tomo")]
        out: PathBuf,
    },
    /// Closed-form Wigner function of the chain state on the configured grid.
    WignerAnalytic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeFlags,
        #[arg(long, default_value_t = 14.1e6)]
        f_hz: f64,
        #[arg(long, default_value = "wigner_analytic.csv")]
        out: PathBuf,
    },
    /// Lock parameter b and signal inversions for a list of angles.
    LockPlan {
        #[command(flatten)]
        common: Common,
        /// Target quadrature angles in degrees.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,45,90,135,180,225,270,315",
            allow_negative_numbers = true
        )]
        angles: Vec<f64>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a command from its manifest.
    Replay {
        manifest: PathBuf,
        /// Output path replacing the recorded one.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModeFlags {
    /// Two-sideband transfer referenced to the carrier.
    #[arg(long, conflicts_with = "approx")]
    exact: bool,
    /// Single resonant-sideband approximation.
    #[arg(long)]
    approx: bool,
}

impl ModeFlags {
    fn apply(&self, cfg: &mut ConfigFile) {
        if self.exact {
            cfg.mode = TransferMode::Exact;
        } else if self.approx {
            cfg.mode = TransferMode::Approx;
        }
    }
}

#[derive(Args, Debug)]
struct FreqRange {
    #[arg(long, default_value_t = 12e6)]
    freq_start: f64,
    #[arg(long, default_value_t = 18e6)]
    freq_stop: f64,
    #[arg(long, default_value_t = 601)]
    freq_points: usize,
}

fn load(common: &Common) -> Result<ConfigFile> {
    match &common.config {
        Some(p) => read_config(p),
        None => Ok(ConfigFile::default()),
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("FDSQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation(format!("FDSQ_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let (params, config, out) = match cli.command {
        Command::Spectrum { common, mode, freq, angles, out } => {
            let mut cfg = load(&common)?;
            mode.apply(&mut cfg);
            let p = Params::Spectrum {
                angles_deg: angles,
                freq_start: freq.freq_start,
                freq_stop: freq.freq_stop,
                freq_points: freq.freq_points,
            };
            (p, cfg, Some(out))
        }
        Command::Rotation { common, freq, out } => {
            let cfg = load(&common)?;
            let p = Params::Rotation {
                freq_start: freq.freq_start,
                freq_stop: freq.freq_stop,
                freq_points: freq.freq_points,
            };
            (p, cfg, Some(out))
        }
        Command::Tomo { common, mode, f_hz, n_angles, n_samples, seed, out } => {
            let mut cfg = load(&common)?;
            mode.apply(&mut cfg);
            let t = &mut cfg.tomography;
            t.n_angles = n_angles.unwrap_or(t.n_angles);
            t.n_per_angle = n_samples.unwrap_or(t.n_per_angle);
            t.seed = seed.unwrap_or(t.seed);
            (Params::Tomo { f_hz }, cfg, Some(out))
        }
        Command::WignerAnalytic { common, mode, f_hz, out } => {
            let mut cfg = load(&common)?;
            mode.apply(&mut cfg);
            (Params::WignerAnalytic { f_hz }, cfg, Some(out))
        }
        Command::LockPlan { common, angles, out } => {
            let cfg = load(&common)?;
            (Params::LockPlan { angles_deg: angles }, cfg, out)
        }
        Command::Replay { manifest, out } => {
            let m: RunManifest = read_json(&manifest)?;
            let params = Params::from_manifest(&m)?;
            m.config.chain()?;
            m.config.run_spec()?;
            (params, m.config, Some(out))
        }
    };
    execute(&params, &config, out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdsq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
