use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uwqkd::harness::{parse_config, run_experiment, run_preset, ExperimentConfig, HarnessError, Preset};

/// Polarized Monte Carlo simulation of underwater BB84 links.
#[derive(Parser)]
#[command(name = "uwqkd", version)]
struct Cli {
    /// Worker threads. Precedence: this flag, then `workers` in the
    /// configuration, then `UWQKD_WORKERS`, then all available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a configuration file.
    Run {
        config: PathBuf,
        /// Output CSV (overrides `output` in the file; stdout when neither is set).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate one of the built-in figure sweeps.
    Preset {
        name: String,
        #[arg(long)]
        photons: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Optional configuration supplying PSD, link and water overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a configuration file without running it.
    Validate { config: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

const WORKERS_ENV: &str = "UWQKD_WORKERS";

fn env_workers() -> Result<Option<usize>, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Config(format!("{WORKERS_ENV}=`{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_workers(cfg: &mut ExperimentConfig, flag: Option<usize>) -> Result<(), Failure> {
    cfg.workers = match flag.or(cfg.workers) {
        Some(w) => Some(w),
        None => env_workers()?,
    };
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = load(&config)?;
            resolve_workers(&mut cfg, cli.workers)?;
            if out.is_some() {
                cfg.output = out;
            }
            let table = run_experiment(&cfg)?;
            report(&cfg, &table)
        }
        Command::Preset { name, photons, seed, config, out } => {
            let preset: Preset = name.parse().map_err(Failure::Config)?;
            let mut cfg = match &config {
                Some(path) => load(path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(n) = photons {
                cfg.photons = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            resolve_workers(&mut cfg, cli.workers)?;
            if out.is_some() {
                cfg.output = out;
            }
            cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let table = run_preset(preset, &cfg)?;
            report(&cfg, &table)
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let sweep = cfg
                .sweep
                .as_ref()
                .map(|s| format!("{} x{}", s.key.name(), s.values.len()))
                .unwrap_or_else(|| "none".into());
            println!("ok: config hash {}, sweep {sweep}, {} photons per state", cfg.hash(), cfg.photons);
            Ok(())
        }
    }
}

fn report(cfg: &ExperimentConfig, table: &uwqkd::harness::ResultTable) -> Result<(), Failure> {
    match &cfg.output {
        Some(path) => eprintln!("wrote {} rows to {}", table.rows.len(), path.display()),
        None => print!("{}", table.to_csv(None)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
