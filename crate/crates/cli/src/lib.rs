//! File formats, configuration and subcommands for the `fim` binary.

pub mod ablate;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod gen;
pub mod predict;
pub mod render;
pub mod runtime;

use std::path::Path;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Trains the reward map and writes it as a parameter file.
pub fn train(cfg: &RunConfig, out: &Path) -> CliResult<formats::ParamsFile> {
    let (params, diag, n) = runtime::train_params(&cfg.forecast)?;
    let file = formats::ParamsFile::new(&params, &diag, cfg.forecast.demo_horizon_factor, n);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        runtime::create_dir(dir)?;
    }
    formats::write_json(out, &file)?;
    Ok(file)
}
