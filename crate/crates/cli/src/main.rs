//! `kanrd`: simulate radar dwells, train and snap histogram detectors, and
//! compare them against OS-CFAR.

mod commands;
mod config;
mod roster;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kanrd::Error;

use crate::commands::MapSource;
use crate::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "kanrd", version, about = "Histogram-segment radar detection workbench")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate dwells: IF cubes, RD maps and ground truth.
    Simulate {
        #[arg(long)]
        dwells: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        targets: Option<usize>,
        /// Also write `segments.csv` from this many labelled dwells.
        #[arg(long)]
        segment_dwells: Option<usize>,
        /// Skip the IF cube files.
        #[arg(long)]
        no_cubes: bool,
    },
    /// Train, prune and snap a detector network.
    Train {
        /// Directory holding `segments.csv` (or the file itself).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        m_bins: Option<usize>,
        /// Dwells to simulate when no data is given.
        #[arg(long)]
        dwells: Option<usize>,
        #[arg(long)]
        l1: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Snap a saved network to a closed-form rule.
    Snap {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run one detector on one RD map or IF cube.
    Detect {
        #[arg(long, conflicts_with = "cube", required_unless_present = "cube")]
        map: Option<PathBuf>,
        #[arg(long)]
        cube: Option<PathBuf>,
        /// `paper-eq7-m10`, `paper-eq8-m5`, `oscfar@<pfa>`, `kan:<file>` or `rule:<file>`.
        #[arg(long, default_value = "paper-eq7-m10")]
        detector: String,
    },
    /// Monte Carlo P_D / P_FA comparison of the detector roster.
    Eval {
        /// Comma-separated roster; replaces the configured one.
        #[arg(long, value_delimiter = ',')]
        detectors: Option<Vec<String>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated SNR points (dB).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_grid: Option<Vec<f64>>,
        #[arg(long)]
        targets: Option<usize>,
        #[arg(long)]
        eval_dwells: Option<usize>,
        #[arg(long)]
        keep_trials: bool,
    },
    /// Runtime scaling of the segment pipeline and OS-CFAR.
    Bench {
        #[arg(long)]
        repeats: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::UnknownDetector(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate {
            dwells,
            snr_db,
            targets,
            segment_dwells,
            no_cubes,
        } => {
            set(&mut cfg.simulate.dwells, dwells);
            set(&mut cfg.simulate.snr_db, snr_db);
            set(&mut cfg.scenario.n_targets, targets);
            set(&mut cfg.simulate.segment_dwells, segment_dwells);
            cfg.simulate.write_cubes &= !no_cubes;
            commands::simulate(&cfg)?;
        }
        Command::Train {
            data,
            m_bins,
            dwells,
            l1,
            max_iter,
        } => {
            set(&mut cfg.train.m_bins, m_bins);
            set(&mut cfg.train.dwells, dwells);
            set(&mut cfg.train.options.l1, l1);
            set(&mut cfg.train.options.lbfgs.max_iter, max_iter);
            commands::train_cmd(&cfg, data.as_deref())?;
        }
        Command::Snap { model } => commands::snap_cmd(&cfg, &model)?,
        Command::Detect { map, cube, detector } => {
            let src = match (map, cube) {
                (Some(m), _) => MapSource::Map(m),
                (None, Some(c)) => MapSource::Cube(c),
                (None, None) => return Err(Failure::Config("need --map or --cube".into())),
            };
            commands::detect_cmd(&cfg, &src, &detector)?;
        }
        Command::Eval {
            detectors,
            trials,
            snr_grid,
            targets,
            eval_dwells,
            keep_trials,
        } => {
            set(&mut cfg.detectors, detectors);
            set(&mut cfg.trials, trials);
            set(&mut cfg.snr_grid, snr_grid);
            set(&mut cfg.scenario.n_targets, targets);
            set(&mut cfg.eval_dwells, eval_dwells);
            cfg.keep_trials |= keep_trials;
            commands::eval_cmd(&cfg)?;
        }
        Command::Bench { repeats } => {
            set(&mut cfg.bench.repeats, repeats);
            commands::bench_cmd(&cfg)?;
        }
    }
    Ok(())
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
