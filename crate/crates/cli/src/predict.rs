use std::path::{Path, PathBuf};

use fim_core::irl::RewardMapParams;
use fim_core::occupancy::rasterize_gt_ogm;
use fim_core::pipeline::{forecast_scene, forecast_vanilla};
use fim_core::scene::SceneContext;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{
    field_csv, grid_image, gt_ogm_bytes, pgm_bytes, pred_ogm_bytes, read_scene, scale_to_u8,
    to_json_bytes, write_bytes, write_json, ForecastFile, ParamsFile,
};
use crate::runtime::{collect_scene_files, create_dir, load_params, scene_id, train_params};

pub struct PredictOptions {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub params: Option<PathBuf>,
    pub reasoning: bool,
}

/// Files produced for one scene, written after all scenes succeed.
struct SceneOutput {
    files: Vec<(String, Vec<u8>)>,
}

/// Reward parameters for a run: loaded from `path`, or trained when absent.
/// Freshly trained parameters are returned for saving.
pub fn resolve_params(
    cfg: &RunConfig,
    path: Option<&Path>,
) -> CliResult<(RewardMapParams, Option<ParamsFile>)> {
    match path {
        Some(p) => Ok((load_params(p)?, None)),
        None => {
            let (params, diag, n) = train_params(&cfg.forecast)?;
            let file = ParamsFile::new(&params, &diag, cfg.forecast.demo_horizon_factor, n);
            Ok((params, Some(file)))
        }
    }
}

fn predict_one(
    id: &str,
    scene: &SceneContext,
    cfg: &RunConfig,
    params: Option<&RewardMapParams>,
) -> CliResult<SceneOutput> {
    let f = &cfg.forecast;
    let mut files = Vec::new();
    match params {
        Some(params) => {
            let out = forecast_scene(scene, params, f)?;
            let file = ForecastFile::new(
                id,
                scene.kind,
                true,
                f.demo_horizon_factor,
                &out.forecast,
                cfg.write_proposals,
            );
            files.push((format!("{id}.forecast.json"), to_json_bytes(&file)));
            if cfg.write_artifacts {
                let reward = out.full_reward(&f.grid);
                let (rows, cols) = (f.grid.rows(), f.grid.cols());
                files.push((
                    format!("{id}.reward.csv"),
                    field_csv(rows, cols, &reward).into_bytes(),
                ));
                files.push((
                    format!("{id}.reward.pgm"),
                    pgm_bytes(cols, rows, &grid_image(rows, cols, &scale_to_u8(&reward))),
                ));
                let occ = out.occupancy(&f.grid, f.horizon)?;
                files.push((format!("{id}.ogm.bin"), pred_ogm_bytes(&occ)));
                let gt = rasterize_gt_ogm(&out.prepared.scene, &f.grid, occ.steps);
                files.push((format!("{id}.gt_ogm.bin"), gt_ogm_bytes(&gt)));
            }
        }
        None => {
            let forecast = forecast_vanilla(scene, f)?;
            let file = ForecastFile::new(
                id,
                scene.kind,
                false,
                f.demo_horizon_factor,
                &forecast,
                cfg.write_proposals,
            );
            files.push((format!("{id}.forecast.json"), to_json_bytes(&file)));
        }
    }
    Ok(SceneOutput { files })
}

pub fn run(cfg: &RunConfig, opts: &PredictOptions) -> CliResult<usize> {
    let paths = collect_scene_files(&opts.inputs)?;
    if paths.is_empty() {
        return Err(CliError::new("input", "no scene files found"));
    }
    let scenes = paths
        .iter()
        .map(|p| read_scene(p).map(|s| (scene_id(p), s)))
        .collect::<CliResult<Vec<_>>>()?;
    create_dir(&opts.out)?;

    let (params, trained) = if opts.reasoning {
        let (p, t) = resolve_params(cfg, opts.params.as_deref())?;
        (Some(p), t)
    } else {
        (None, None)
    };
    let outputs = scenes
        .par_iter()
        .zip(&paths)
        .map(|((id, scene), path)| {
            predict_one(id, scene, cfg, params.as_ref())
                .map_err(|e| e.with("scene", path.display().to_string()))
        })
        .collect::<CliResult<Vec<_>>>()?;

    write_bytes(&opts.out.join("config.txt"), cfg.to_text().as_bytes())?;
    if let Some(file) = trained {
        write_json(&opts.out.join("params.json"), &file)?;
    }
    for out in &outputs {
        for (name, bytes) in &out.files {
            write_bytes(&opts.out.join(name), bytes)?;
        }
    }
    log::info!(
        "wrote {} forecasts to {}",
        outputs.len(),
        opts.out.display()
    );
    Ok(outputs.len())
}
