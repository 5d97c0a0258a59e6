//! Command-line front end.
//!
//! Every subcommand accepts `--config` (a flat `key = value` file, see
//! [`config`]), `--out` and `--seed`; data-consuming subcommands also take
//! `--states`/`--controls` to read CSV traces instead of simulating. Failures
//! print a single `error: code=<code> message="<text>"` line to stderr and
//! exit with status 1.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod model_io;
pub mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::simqueue;
use config::{Config, DataSource};
use csvio::{write_file, Dataset};

#[derive(Debug, Parser)]
#[command(name = "sigdmd", version, about = "Identify and predict signalized-intersection queue dynamics with DMDc / Hankel-DMDc")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DataPaths {
    /// State CSV (`t,q_…`); requires --controls.
    #[arg(long, requires = "controls")]
    pub states: Option<PathBuf>,
    /// Control CSV (`t,u_…`); requires --states.
    #[arg(long, requires = "states")]
    pub controls: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the intersection simulator and write its trace.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the configured methods and write models, matrix grids and spectra.
    Identify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataPaths,
    },
    /// Roll a stored model forward after the training window.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataPaths,
        /// Model file written by `identify` or `experiment`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Evaluate the (train_snapshots, embedding, window) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataPaths,
    },
    /// Recompute RMSE/MAE from prediction CSVs.
    Metrics {
        /// Prediction files (`t,pred_…,actual_…`).
        #[arg(long, required = true, num_args = 1..)]
        predictions: Vec<PathBuf>,
        /// Directory for metrics.csv; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify, predict every horizon and write the full report bundle.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataPaths,
    },
}

fn load_config(common: &Common, data: Option<&DataPaths>) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(DataPaths {
        states: Some(states),
        controls: Some(controls),
    }) = data
    {
        cfg.experiment.source = DataSource::Csv {
            states: states.clone(),
            controls: controls.clone(),
        };
    }
    if let Some(seed) = common.seed {
        cfg.experiment.set_seed(seed);
    }
    Ok(cfg)
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn simulate_command(common: &Common) -> Result<()> {
    let cfg = load_config(common, None)?;
    let DataSource::Simulate(sim) = &cfg.experiment.source else {
        return Err(Error::Config("simulate needs source = simulate".into()));
    };
    let trace = simqueue::simulate(sim)?;
    let ds = Dataset::from_trace(&trace);
    create_dir(&common.out)?;
    csvio::emit_csv(&ds, &common.out.join("states.csv"), &common.out.join("controls.csv"))?;
    let mut volumes = String::from("movement,volume\n");
    for (name, v) in ds.state_names.iter().zip(trace.volumes()) {
        let _ = writeln!(volumes, "{name},{v}");
    }
    write_file(&common.out.join("volumes.csv"), &volumes)?;
    write_file(
        &common.out.join("manifest.txt"),
        &format!(
            "software = {}\nseed = {}\nconfig_digest = {}\nsteps = {}\nstart_second = {}\n",
            experiment::SOFTWARE_VERSION,
            trace.seed_used,
            trace.config_digest,
            trace.n_steps(),
            trace.start_second
        ),
    )
}

fn metrics_command(predictions: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut table = String::from("file,rmse,mae\n");
    for p in predictions {
        let (rmse, mae) = experiment::metrics_from_predictions(p)?;
        let name = p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        let _ = writeln!(table, "{name},{rmse},{mae}");
    }
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join("metrics.csv"), &table)
        }
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => simulate_command(&common),
        Command::Identify { common, data } => {
            let cfg = load_config(&common, Some(&data))?;
            experiment::run_identify(&cfg.experiment, &common.out).map(drop)
        }
        Command::Predict {
            common,
            data,
            model,
        } => {
            let cfg = load_config(&common, Some(&data))?;
            experiment::run_predict(&cfg.experiment, &model, &common.out).map(drop)
        }
        Command::Sweep { common, data } => {
            let cfg = load_config(&common, Some(&data))?;
            cfg.experiment.validate()?;
            let ds = experiment::load_dataset(&cfg.experiment)?;
            let rows = sweep::run_sweep(&ds, &cfg.sweep)?;
            create_dir(&common.out)?;
            write_file(&common.out.join("sweep.csv"), &sweep::sweep_csv(&rows))
        }
        Command::Metrics { predictions, out } => metrics_command(&predictions, out.as_deref()),
        Command::Experiment { common, data } => {
            let cfg = load_config(&common, Some(&data))?;
            experiment::run_experiment(&cfg.experiment, &common.out).map(drop)
        }
    }
}

/// Machine-parsable failure line.
pub fn error_line(e: &Error) -> String {
    format!("error: code={} message={:?}", e.code(), e.to_string())
}

pub fn main_entry() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
