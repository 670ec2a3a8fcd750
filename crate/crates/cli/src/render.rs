use std::path::{Path, PathBuf};

use fim_core::{GridSpec, Point};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{
    grid_image, parse_field_csv, parse_ogm, pgm_bytes, read_json, read_scene, scale_to_u8,
    write_bytes, ForecastFile, OgmFile,
};
use crate::runtime::create_dir;

pub const LANE_LEVEL: u8 = 40;
pub const GT_LEVEL: u8 = 255;

/// Gray level of mode `k`; distinct for every mode and never the lane or
/// ground-truth level.
pub fn mode_level(k: usize, modes: usize) -> u8 {
    let span = 200.0 - 80.0;
    let step = if modes > 1 {
        span / (modes - 1) as f64
    } else {
        0.0
    };
    (80.0 + step * k as f64).round() as u8
}

fn stem(path: &Path) -> String {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    name.split('.').next().unwrap_or(name).to_string()
}

/// Marks the cells crossed by the polyline `points`.
pub fn draw_polyline(canvas: &mut [u8], spec: &GridSpec, points: &[Point], level: u8) {
    let step = 0.25 * spec.resolution();
    let mut mark = |p: Point| {
        if let Some(c) = spec.world_to_cell(p) {
            canvas[spec.flat(c)] = level;
        }
    };
    if let Some(&p) = points.first() {
        mark(p);
    }
    for w in points.windows(2) {
        let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            mark([
                w[0][0] + t * (w[1][0] - w[0][0]),
                w[0][1] + t * (w[1][1] - w[0][1]),
            ]);
        }
    }
}

/// Overlay of all forecast modes (and, with a scene, its lanes and the
/// ground truth) on the forecast grid.
pub fn overlay(
    forecast: &ForecastFile,
    spec: &GridSpec,
    scene: Option<&fim_core::scene::SceneContext>,
) -> Vec<u8> {
    let mut canvas = vec![0u8; spec.len()];
    if let Some(s) = scene {
        for lane in &s.lanes {
            for seg in lane {
                draw_polyline(&mut canvas, spec, &[seg.start, seg.end], LANE_LEVEL);
            }
        }
    }
    let k = forecast.modes.len();
    for (i, m) in forecast.modes.iter().enumerate() {
        let mut pts = vec![[0.0, 0.0]];
        pts.extend_from_slice(&m.points);
        draw_polyline(&mut canvas, spec, &pts, mode_level(i, k));
    }
    if let Some(s) = scene {
        let mut pts = vec![[0.0, 0.0]];
        pts.extend_from_slice(&s.gt_future);
        draw_polyline(&mut canvas, spec, &pts, GT_LEVEL);
    }
    canvas
}

/// Renders a reward CSV, a packed occupancy file or a forecast JSON to PGM
/// images in `out`. Returns the written paths.
pub fn run(
    cfg: &RunConfig,
    artifact: &Path,
    scene: Option<&Path>,
    out: &Path,
) -> CliResult<Vec<PathBuf>> {
    create_dir(out)?;
    let name = artifact.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let base = stem(artifact);
    let mut written = Vec::new();
    let mut emit = |file: String, bytes: Vec<u8>| -> CliResult<()> {
        let path = out.join(file);
        write_bytes(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    if name.ends_with(".csv") {
        let text = std::fs::read_to_string(artifact).map_err(|e| CliError::io(artifact, e))?;
        let (rows, cols, values) = parse_field_csv(&text)
            .ok_or_else(|| CliError::format(artifact, "expected row,col,value lines"))?;
        emit(
            format!("{base}.reward.pgm"),
            pgm_bytes(cols, rows, &grid_image(rows, cols, &scale_to_u8(&values))),
        )?;
    } else if name.ends_with(".bin") {
        let bytes = std::fs::read(artifact).map_err(|e| CliError::io(artifact, e))?;
        let ogm = parse_ogm(&bytes)
            .ok_or_else(|| CliError::format(artifact, "not a packed occupancy grid"))?;
        let (rows, cols, frames): (usize, usize, Vec<Vec<u8>>) = match ogm {
            OgmFile::Binary(g) => (
                g.rows,
                g.cols,
                (0..g.steps)
                    .map(|t| g.slice(t).iter().map(|&v| v * 255).collect())
                    .collect(),
            ),
            OgmFile::Probabilities(p) => (
                p.rows,
                p.cols,
                (0..p.steps)
                    .map(|t| {
                        p.slice(t)
                            .iter()
                            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                            .collect()
                    })
                    .collect(),
            ),
        };
        let tag = if name.contains("gt_ogm") {
            "gt_ogm"
        } else {
            "ogm"
        };
        for (t, frame) in frames.iter().enumerate() {
            emit(
                format!("{base}.{tag}_t{t:02}.pgm"),
                pgm_bytes(cols, rows, &grid_image(rows, cols, frame)),
            )?;
        }
    } else if name.ends_with(".json") {
        let forecast: ForecastFile = read_json(artifact)?;
        let spec = cfg.forecast.grid;
        let scene = match scene {
            Some(p) => Some(read_scene(p)?.normalize_to_target()?),
            None => None,
        };
        let canvas = overlay(&forecast, &spec, scene.as_ref());
        emit(
            format!("{base}.overlay.pgm"),
            pgm_bytes(
                spec.cols(),
                spec.rows(),
                &grid_image(spec.rows(), spec.cols(), &canvas),
            ),
        )?;
    } else {
        return Err(CliError::format(
            artifact,
            "unrecognized artifact type (expected .csv, .bin or .json)",
        ));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_levels_are_distinct() {
        for k in 1..=8 {
            let levels: Vec<u8> = (0..k).map(|i| mode_level(i, k)).collect();
            let mut d = levels.clone();
            d.dedup();
            assert_eq!(d.len(), k);
            assert!(levels
                .iter()
                .all(|&l| l != LANE_LEVEL && l != GT_LEVEL && l != 0));
        }
    }

    #[test]
    fn straight_line_marks_a_column() {
        let spec = GridSpec::new(20, 10, 1.0, fim_core::CellIndex::new(2, 5)).unwrap();
        let mut canvas = vec![0; spec.len()];
        draw_polyline(&mut canvas, &spec, &[[0.0, 0.0], [10.0, 0.0]], 9);
        for r in 2..=12 {
            assert_eq!(canvas[r * 10 + 5], 9);
        }
        assert_eq!(canvas.iter().filter(|&&v| v == 9).count(), 11);
    }
}
