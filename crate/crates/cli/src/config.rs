//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::Path;

use fim_core::irl::{Optimizer, RewardMode};
use fim_core::occupancy::{FOCAL_ALPHA, FOCAL_GAMMA};
use fim_core::pipeline::ForecastConfig;
use fim_core::{CellIndex, GridSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub forecast: ForecastConfig,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    /// Include the raw proposals in forecast files.
    pub write_proposals: bool,
    /// Write reward and occupancy artifacts next to each forecast.
    pub write_artifacts: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            forecast: ForecastConfig::default(),
            focal_gamma: FOCAL_GAMMA,
            focal_alpha: FOCAL_ALPHA,
            write_proposals: false,
            write_artifacts: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::config(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values. Blank
    /// lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let f = &mut self.forecast;
        let g = f.grid;
        let regrid = |rows: usize, cols: usize, d: f64, ar: usize, ac: usize| {
            GridSpec::new(rows, cols, d, CellIndex::new(ar, ac))
                .map_err(|e| CliError::config(e.to_string()))
        };
        match key {
            "grid.rows" => {
                f.grid = regrid(
                    parse(key, value)?,
                    g.cols(),
                    g.resolution(),
                    g.anchor().row,
                    g.anchor().col,
                )?
            }
            "grid.cols" => {
                f.grid = regrid(
                    g.rows(),
                    parse(key, value)?,
                    g.resolution(),
                    g.anchor().row,
                    g.anchor().col,
                )?
            }
            "grid.resolution" => {
                f.grid = regrid(
                    g.rows(),
                    g.cols(),
                    parse(key, value)?,
                    g.anchor().row,
                    g.anchor().col,
                )?
            }
            "grid.anchor_row" => {
                f.grid = regrid(
                    g.rows(),
                    g.cols(),
                    g.resolution(),
                    parse(key, value)?,
                    g.anchor().col,
                )?
            }
            "grid.anchor_col" => {
                f.grid = regrid(
                    g.rows(),
                    g.cols(),
                    g.resolution(),
                    g.anchor().row,
                    parse(key, value)?,
                )?
            }
            "horizon" => f.horizon = parse(key, value)?,
            "rollouts" => f.rollouts = parse(key, value)?,
            "modes" => f.modes = parse(key, value)?,
            "temperature" => f.temperature = parse(key, value)?,
            "smoothing" => f.smoothing = parse(key, value)?,
            "demo_horizon_factor" => f.demo_horizon_factor = parse(key, value)?,
            "seed" => f.seed = parse(key, value)?,
            "irl.mode" => {
                f.reward_mode = match value {
                    "linear" => RewardMode::Linear,
                    "two_layer" => RewardMode::TwoLayer,
                    _ => {
                        return Err(CliError::config(format!(
                            "irl.mode must be linear or two_layer, got {value:?}"
                        )))
                    }
                }
            }
            "irl.hidden" => f.hidden = parse(key, value)?,
            "irl.lr" => f.irl.lr = parse(key, value)?,
            "irl.max_iters" => f.irl.max_iters = parse(key, value)?,
            "irl.tol" => f.irl.tol = parse(key, value)?,
            "irl.optimizer" => {
                f.irl.optimizer = match value {
                    "adam" => Optimizer::Adam,
                    "safeguarded_adam" => Optimizer::SafeguardedAdam,
                    "gd" => Optimizer::GradientDescent,
                    _ => {
                        return Err(CliError::config(format!(
                            "irl.optimizer must be adam, safeguarded_adam or gd, got {value:?}"
                        )))
                    }
                }
            }
            "train.scenes_per_kind" => f.train_scenes_per_kind = parse(key, value)?,
            "raster.lane_width" => f.raster.lane_width = parse(key, value)?,
            "raster.max_centerline_distance" => {
                f.raster.max_centerline_distance = parse(key, value)?
            }
            "raster.vehicle_length" => f.raster.vehicle_length = parse(key, value)?,
            "raster.vehicle_width" => f.raster.vehicle_width = parse(key, value)?,
            "focal.gamma" => self.focal_gamma = parse(key, value)?,
            "focal.alpha" => self.focal_alpha = parse(key, value)?,
            "output.proposals" => self.write_proposals = parse_bool(key, value)?,
            "output.artifacts" => self.write_artifacts = parse_bool(key, value)?,
            _ => return Err(CliError::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.forecast
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if !(self.focal_gamma >= 0.0) || !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(CliError::config(
                "focal.gamma must be >= 0 and focal.alpha in (0, 1)".to_string(),
            ));
        }
        Ok(())
    }

    /// Effective configuration in the same format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let f = &self.forecast;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.rows", f.grid.rows().to_string());
        kv("grid.cols", f.grid.cols().to_string());
        kv("grid.resolution", f.grid.resolution().to_string());
        kv("grid.anchor_row", f.grid.anchor().row.to_string());
        kv("grid.anchor_col", f.grid.anchor().col.to_string());
        kv("horizon", f.horizon.to_string());
        kv("rollouts", f.rollouts.to_string());
        kv("modes", f.modes.to_string());
        kv("temperature", f.temperature.to_string());
        kv("smoothing", f.smoothing.to_string());
        kv(
            "demo_horizon_factor",
            format!("{:?}", f.demo_horizon_factor),
        );
        kv("seed", f.seed.to_string());
        kv(
            "irl.mode",
            match f.reward_mode {
                RewardMode::Linear => "linear",
                RewardMode::TwoLayer => "two_layer",
            }
            .to_string(),
        );
        kv("irl.hidden", f.hidden.to_string());
        kv("irl.lr", f.irl.lr.to_string());
        kv("irl.max_iters", f.irl.max_iters.to_string());
        kv("irl.tol", f.irl.tol.to_string());
        kv(
            "irl.optimizer",
            match f.irl.optimizer {
                Optimizer::Adam => "adam",
                Optimizer::SafeguardedAdam => "safeguarded_adam",
                Optimizer::GradientDescent => "gd",
            }
            .to_string(),
        );
        kv("train.scenes_per_kind", f.train_scenes_per_kind.to_string());
        kv("raster.lane_width", f.raster.lane_width.to_string());
        kv(
            "raster.max_centerline_distance",
            f.raster.max_centerline_distance.to_string(),
        );
        kv("raster.vehicle_length", f.raster.vehicle_length.to_string());
        kv("raster.vehicle_width", f.raster.vehicle_width.to_string());
        kv("focal.gamma", self.focal_gamma.to_string());
        kv("focal.alpha", self.focal_alpha.to_string());
        kv("output.proposals", self.write_proposals.to_string());
        kv("output.artifacts", self.write_artifacts.to_string());
        s
    }
}
