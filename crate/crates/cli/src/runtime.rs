//! Shared plumbing: thread pools, scene discovery and parallel training.

use std::path::{Path, PathBuf};

use fim_core::irl::{
    problem_loss_and_grad, train_irl_with, IrlProblem, RewardMapParams, TrainDiagnostics,
};
use fim_core::pipeline::{irl_problem, training_scenes, ForecastConfig};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::formats::{read_json, ParamsFile};

/// Runs `f` on a pool with `jobs` workers (`0` picks the machine default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::new("runtime", e.to_string()))?;
    Ok(pool.install(f))
}

/// Scene files named directly or found (non-recursively) in directories,
/// sorted by path. Manifests and forecast files are skipped.
pub fn collect_scene_files(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| CliError::io(input, e))?;
            for entry in entries {
                let path = entry.map_err(|e| CliError::io(input, e))?.path();
                if is_scene_file(&path) {
                    out.push(path);
                }
            }
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(CliError::new("io", "input does not exist")
                .with("path", input.display().to_string()));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn is_scene_file(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".json") && name != "manifest.json" && !name.ends_with(".forecast.json")
}

/// File stem used to name per-scene outputs.
pub fn scene_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene")
        .to_string()
}

/// Trains the shared reward map on the synthetic training set. Per-problem
/// work runs in parallel; the reduction order is fixed.
pub fn train_params(cfg: &ForecastConfig) -> CliResult<(RewardMapParams, TrainDiagnostics, usize)> {
    let scenes = training_scenes(cfg.train_scenes_per_kind, cfg.seed);
    if scenes.is_empty() {
        return Err(CliError::config("train.scenes_per_kind must be at least 1"));
    }
    let problems: Vec<IrlProblem> = scenes
        .par_iter()
        .map(|s| irl_problem(s, cfg))
        .collect::<fim_core::Result<_>>()?;
    log::info!(
        "training reward map on {} scenes (demo horizon factor {})",
        problems.len(),
        cfg.demo_horizon_factor
    );
    let (params, diag) = train_irl_with(&problems, cfg.initial_params(), &cfg.irl, |ps, p| {
        ps.par_iter().map(|q| problem_loss_and_grad(q, p)).collect()
    })?;
    log::info!(
        "training finished after {} iterations, nll {:.4} -> {:.4}",
        diag.iterations(),
        diag.nll.first().copied().unwrap_or(f64::NAN),
        diag.nll.last().copied().unwrap_or(f64::NAN)
    );
    Ok((params, diag, problems.len()))
}

pub fn load_params(path: &Path) -> CliResult<RewardMapParams> {
    let file: ParamsFile = read_json(path)?;
    file.params(path)
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
