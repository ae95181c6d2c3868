use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use m2m_core::calibrate::{save_tf, Direction};
use m2m_core::experiment::{
    cmd_matrix, cmd_report, cmd_simulate, parse_acquisition, parse_report, run_experiment, CalibPhantom,
    CalibrationMode, Config, ExperimentSpec, Session, StatsRegime, TfKey, MATRIX_FILES,
};
use m2m_core::{Error, Result};

#[derive(Parser)]
#[command(name = "m2m", version, about = "Machine-to-machine RF calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset suite
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a transfer function and save it
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// TrainTime builds the forward function, TestTime the inverse
        #[arg(long, default_value = "TrainTime")]
        mode: String,
        #[arg(long, default_value = "Calib1")]
        phantom: String,
        #[arg(long, default_value = "Stable")]
        acquisition: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one cell of the matrix
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        stats: String,
        #[arg(long, default_value = "Calib1")]
        phantom: String,
        #[arg(long, default_value = "Stable")]
        acquisition: String,
        /// CSV file to write; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full matrix and write one CSV per table
    Matrix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the matrix CSVs found in a directory as aligned tables
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = c.snr {
        cfg.snr = s;
    }
    if let Some(n) = c.reps {
        cfg.n_repetitions = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn direction_for(mode: CalibrationMode) -> Result<Direction> {
    match mode {
        CalibrationMode::TrainTime => Ok(Direction::Forward),
        CalibrationMode::TestTime => Ok(Direction::Inverse),
        CalibrationMode::None => Err(Error::BadConfig("mode None has no transfer function".into())),
    }
}

fn print_table(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(format!("reading {}", path.display()), e)
        }
    })?;
    let rows = parse_report(&text)?;
    println!("{}", path.display());
    println!(
        "  {:<10} {:<16} {:<7} {:<9} {:>9} {:>17} {:>17}",
        "mode", "stats", "phantom", "acq", "snr", "accuracy", "auc"
    );
    for r in rows {
        println!(
            "  {:<10} {:<16} {:<7} {:<9} {:>9.2} {:>8.4} +- {:.4} {:>8.4} +- {:.4}",
            r.spec.mode.as_str(),
            r.spec.stats.as_str(),
            r.spec.calib_phantom.as_str(),
            m2m_core::experiment::acquisition_str(r.spec.acquisition),
            r.spec.snr,
            r.report.mean_accuracy,
            r.report.std_accuracy,
            r.report.mean_auc,
            r.report.std_auc
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = load_config(&common)?;
            for p in cmd_simulate(&cfg, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Calibrate {
            common,
            mode,
            phantom,
            acquisition,
            out,
        } => {
            let cfg = load_config(&common)?;
            let key = TfKey::new(
                phantom.parse::<CalibPhantom>()?,
                parse_acquisition(&acquisition)?,
                direction_for(mode.parse()?)?,
                cfg.snr,
            );
            let session = Session::open(cfg)?;
            save_tf(&*session.transfer_function(key)?, &out)?;
        }
        Command::Experiment {
            common,
            mode,
            stats,
            phantom,
            acquisition,
            out,
        } => {
            let cfg = load_config(&common)?;
            let spec = ExperimentSpec {
                calib_phantom: phantom.parse()?,
                acquisition: parse_acquisition(&acquisition)?,
                ..ExperimentSpec::new(mode.parse()?, stats.parse::<StatsRegime>()?, &cfg)
            };
            let row = run_experiment(&cfg, &spec)?;
            match out {
                Some(path) => cmd_report(&[row], &path)?,
                None => print!("{}", m2m_core::experiment::render_report(&[row])?),
            }
        }
        Command::Matrix { common, out } => {
            let cfg = load_config(&common)?;
            cmd_matrix(&cfg, &out)?;
            for name in MATRIX_FILES {
                println!("{}", out.join(name).display());
            }
        }
        Command::Report { out } => {
            for name in MATRIX_FILES {
                print_table(&out.join(name))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("m2m: {e}");
            ExitCode::FAILURE
        }
    }
}
