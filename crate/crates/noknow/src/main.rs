use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use noknow::{parse_config_for, run_to_dir, CliError, Experiment, Runner, DEFAULT_OUT_DIR, OUT_DIR_ENV};

/// Monitored qubit dynamics with no-knowledge feedback.
#[derive(Debug, Parser)]
#[command(name = "noknow", version)]
struct Args {
    /// One of: trajectory, ensemble, filter-divergence, feedback-cancel,
    /// jump, dqc-scan, convergence.
    experiment: String,

    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; overrides `out_dir` and $NOKNOW_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: Args) -> Result<PathBuf, CliError> {
    let experiment = Experiment::from_name(&args.experiment).ok_or_else(|| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        CliError::Validation(vec![format!(
            "unknown experiment `{}`; expected one of {}",
            args.experiment,
            names.join(", ")
        )])
    })?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::io(format!("reading {}", args.config.display()), e))?;
    let mut cfg = parse_config_for(&text, Some(experiment))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let dir = args
        .out
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let runner = Runner::new(args.threads)?;
    run_to_dir(&cfg, &runner, &dir)
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
