//! Command-line front end: configuration, experiment drivers and output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_for, Experiment, RunConfig};
pub use error::{Category, CliError};
pub use experiments::{run, Runner};
pub use output::{write_table, Table};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NOKNOW_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "noknow-out";

/// Runs `cfg` and writes `<experiment>.<ext>` into `dir`, returning the path.
pub fn run_to_dir(cfg: &RunConfig, runner: &Runner, dir: &Path) -> Result<PathBuf, CliError> {
    let table = run(cfg, runner)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(format!("{}.{}", cfg.experiment.name(), cfg.format.extension()));
    let file = fs::File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    write_table(std::io::BufWriter::new(file), cfg, &table)?;
    Ok(path)
}
