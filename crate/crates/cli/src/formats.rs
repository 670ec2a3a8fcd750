//! On-disk formats: scene, forecast and parameter JSON, PGM images, CSV
//! fields and packed occupancy grids.

use std::fs;
use std::path::Path;

use fim_core::decode::Forecast;
use fim_core::irl::{RewardMapParams, RewardMode, TrainDiagnostics};
use fim_core::occupancy::{ProbOccupancy, STOccupancy};
use fim_core::scene::{
    AgentState, LaneSegment, Pose2, ScenarioKind, SceneContext, AGENT_CHANNELS, MAP_CHANNELS,
};
use fim_core::Point;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, &to_json_bytes(value))
}

/// Scene file. Tensors keep the channel order of the core types.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneFile {
    pub version: u32,
    pub kind: String,
    pub dt: f64,
    pub agents: Vec<Vec<[f64; AGENT_CHANNELS]>>,
    pub lanes: Vec<Vec<[f64; MAP_CHANNELS]>>,
    pub target_index: usize,
    pub gt_future: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended_future: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_futures: Vec<Vec<Point>>,
    /// `[x, y, theta]` mapping scene coordinates to the raw frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<[f64; 3]>,
}

impl SceneFile {
    pub fn from_scene(scene: &SceneContext) -> Self {
        let frame = (scene.frame != Pose2::IDENTITY)
            .then(|| [scene.frame.x, scene.frame.y, scene.frame.theta]);
        SceneFile {
            version: FORMAT_VERSION,
            kind: scene.kind.as_str().to_string(),
            dt: scene.dt,
            agents: scene
                .agents
                .iter()
                .map(|t| t.iter().map(AgentState::to_channels).collect())
                .collect(),
            lanes: scene
                .lanes
                .iter()
                .map(|l| l.iter().map(LaneSegment::to_channels).collect())
                .collect(),
            target_index: scene.target_index,
            gt_future: scene.gt_future.clone(),
            extended_future: scene.extended_future.clone(),
            agent_futures: scene.agent_futures.clone(),
            frame,
        }
    }

    pub fn to_scene(&self) -> fim_core::Result<SceneContext> {
        let kind: ScenarioKind = self.kind.parse()?;
        let frame = self
            .frame
            .map_or(Pose2::IDENTITY, |[x, y, theta]| Pose2 { x, y, theta });
        let scene = SceneContext {
            kind,
            dt: self.dt,
            agents: self
                .agents
                .iter()
                .map(|t| t.iter().map(|&c| AgentState::from_channels(c)).collect())
                .collect(),
            lanes: self
                .lanes
                .iter()
                .map(|l| l.iter().map(|&c| LaneSegment::from_channels(c)).collect())
                .collect(),
            target_index: self.target_index,
            gt_future: self.gt_future.clone(),
            extended_future: self.extended_future.clone(),
            agent_futures: self.agent_futures.clone(),
            frame,
        };
        scene.validate()?;
        Ok(scene)
    }
}

pub fn read_scene(path: &Path) -> CliResult<SceneContext> {
    let file: SceneFile = read_json(path)?;
    if file.version != FORMAT_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported scene version {}", file.version),
        ));
    }
    file.to_scene()
        .map_err(|e| CliError::format(path, e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModeEntry {
    pub prob: f64,
    pub points: Vec<Point>,
}

/// Forecast file; coordinates are in the target-centric frame.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForecastFile {
    pub version: u32,
    pub scene: String,
    pub kind: String,
    pub reasoning: bool,
    pub demo_horizon_factor: f64,
    pub modes: Vec<ModeEntry>,
    pub anchors: Vec<Vec<Point>>,
    pub offsets: Vec<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<Vec<Vec<Point>>>,
}

impl ForecastFile {
    pub fn new(
        scene: &str,
        kind: ScenarioKind,
        reasoning: bool,
        factor: f64,
        f: &Forecast,
        proposals: bool,
    ) -> Self {
        ForecastFile {
            version: FORMAT_VERSION,
            scene: scene.to_string(),
            kind: kind.as_str().to_string(),
            reasoning,
            demo_horizon_factor: factor,
            modes: f
                .modes
                .iter()
                .zip(&f.probs)
                .map(|(m, &p)| ModeEntry {
                    prob: p,
                    points: m.clone(),
                })
                .collect(),
            anchors: f.anchors.clone(),
            offsets: f.offsets.clone(),
            proposals: proposals.then(|| f.proposals.clone()),
        }
    }

    pub fn mode_points(&self) -> Vec<Vec<Point>> {
        self.modes.iter().map(|m| m.points.clone()).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.prob).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsFile {
    pub version: u32,
    pub mode: String,
    pub n_features: usize,
    pub hidden: usize,
    pub input_scale: Vec<f64>,
    pub theta: Vec<f64>,
    pub demo_horizon_factor: f64,
    pub training_scenes: usize,
    pub nll: Vec<f64>,
    pub converged: bool,
}

impl ParamsFile {
    pub fn new(
        params: &RewardMapParams,
        diag: &TrainDiagnostics,
        factor: f64,
        scenes: usize,
    ) -> Self {
        ParamsFile {
            version: FORMAT_VERSION,
            mode: match params.mode {
                RewardMode::Linear => "linear",
                RewardMode::TwoLayer => "two_layer",
            }
            .to_string(),
            n_features: params.n_features,
            hidden: params.hidden,
            input_scale: params.input_scale.clone(),
            theta: params.theta.clone(),
            demo_horizon_factor: factor,
            training_scenes: scenes,
            nll: diag.nll.clone(),
            converged: diag.converged,
        }
    }

    pub fn params(&self, path: &Path) -> CliResult<RewardMapParams> {
        let mode = match self.mode.as_str() {
            "linear" => RewardMode::Linear,
            "two_layer" => RewardMode::TwoLayer,
            other => {
                return Err(CliError::format(
                    path,
                    format!("unknown reward mode {other:?}"),
                ))
            }
        };
        let p = RewardMapParams {
            mode,
            n_features: self.n_features,
            hidden: self.hidden,
            input_scale: self.input_scale.clone(),
            theta: self.theta.clone(),
        };
        if p.theta.len() != RewardMapParams::param_count(mode, p.n_features, p.hidden)
            || p.input_scale.len() != p.n_features
            || !p.is_finite()
        {
            return Err(CliError::format(
                path,
                "parameter vector has the wrong size or non-finite entries",
            ));
        }
        Ok(p)
    }
}

/// Binary PGM (P5), 8-bit.
pub fn pgm_bytes(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a P5 image back to `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let data = bytes.get(pos + 1..)?;
    (data.len() == w * h).then(|| (w, h, data.to_vec()))
}

/// Min-max scales a field to 0..=255. Constant fields map to mid-gray.
pub fn scale_to_u8(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|v| (255.0 * (v - lo) / (hi - lo)).round() as u8)
        .collect()
}

/// Grid field as an image: image row 0 is the farthest-forward grid row and
/// image column 0 the leftmost grid column, so forward points up.
pub fn grid_image(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in (0..rows).rev() {
        for c in (0..cols).rev() {
            out.push(pixels[r * cols + c]);
        }
    }
    out
}

/// `row,col,value` lines with a header.
pub fn field_csv(rows: usize, cols: usize, values: &[f64]) -> String {
    let mut s = String::from("row,col,value\n");
    for r in 0..rows {
        for c in 0..cols {
            s.push_str(&format!("{r},{c},{:?}\n", values[r * cols + c]));
        }
    }
    s
}

pub fn parse_field_csv(text: &str) -> Option<(usize, usize, Vec<f64>)> {
    let mut cells = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let mut it = line.split(',');
        let r: usize = it.next()?.trim().parse().ok()?;
        let c: usize = it.next()?.trim().parse().ok()?;
        let v: f64 = it.next()?.trim().parse().ok()?;
        cells.push((r, c, v));
    }
    let rows = cells.iter().map(|x| x.0).max()? + 1;
    let cols = cells.iter().map(|x| x.1).max()? + 1;
    let mut values = vec![0.0; rows * cols];
    for (r, c, v) in cells {
        values[r * cols + c] = v;
    }
    Some((rows, cols, values))
}

fn ogm_header(rows: usize, cols: usize, steps: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12);
    for v in [rows, cols, steps] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out
}

pub fn gt_ogm_bytes(ogm: &STOccupancy) -> Vec<u8> {
    let mut out = ogm_header(ogm.rows, ogm.cols, ogm.steps);
    out.extend_from_slice(&ogm.data);
    out
}

pub fn pred_ogm_bytes(ogm: &ProbOccupancy) -> Vec<u8> {
    let mut out = ogm_header(ogm.rows, ogm.cols, ogm.steps);
    for &p in &ogm.data {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

pub enum OgmFile {
    Binary(STOccupancy),
    Probabilities(ProbOccupancy),
}

/// Reads either packed occupancy layout, told apart by payload size.
pub fn parse_ogm(bytes: &[u8]) -> Option<OgmFile> {
    let header = bytes.get(..12)?;
    let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (rows, cols, steps) = (word(0), word(1), word(2));
    let n = rows.checked_mul(cols)?.checked_mul(steps)?;
    let body = &bytes[12..];
    if body.len() == n {
        Some(OgmFile::Binary(STOccupancy {
            rows,
            cols,
            steps,
            data: body.to_vec(),
        }))
    } else if body.len() == 4 * n {
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Some(OgmFile::Probabilities(ProbOccupancy {
            rows,
            cols,
            steps,
            data,
        }))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fim_core::scene::generate_scene;

    #[test]
    fn scene_round_trip() {
        for kind in ScenarioKind::ALL {
            let s = generate_scene(kind, 4);
            let file = SceneFile::from_scene(&s);
            let text = to_json_bytes(&file);
            let back: SceneFile = serde_json::from_slice(&text).unwrap();
            assert_eq!(back.to_scene().unwrap(), s);
        }
    }

    #[test]
    fn pgm_round_trip() {
        let px: Vec<u8> = (0..12).collect();
        let bytes = pgm_bytes(4, 3, &px);
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(parse_pgm(&bytes), Some((4, 3, px)));
    }

    #[test]
    fn csv_round_trip() {
        let v = vec![0.1, -2.0, 3.5e-9, 4.0, 5.0, 6.0];
        assert_eq!(parse_field_csv(&field_csv(2, 3, &v)), Some((2, 3, v)));
    }

    #[test]
    fn ogm_layouts() {
        let gt = STOccupancy {
            rows: 2,
            cols: 2,
            steps: 3,
            data: (0..12).map(|i| (i % 2) as u8).collect(),
        };
        match parse_ogm(&gt_ogm_bytes(&gt)) {
            Some(OgmFile::Binary(b)) => assert_eq!(b, gt),
            _ => panic!("expected binary"),
        }
        let pred = ProbOccupancy {
            rows: 2,
            cols: 2,
            steps: 3,
            data: (0..12).map(|i| i as f64 / 16.0).collect(),
        };
        let bytes = pred_ogm_bytes(&pred);
        assert_eq!(&bytes[..12], &[2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        match parse_ogm(&bytes) {
            Some(OgmFile::Probabilities(p)) => assert_eq!(p, pred),
            _ => panic!("expected probabilities"),
        }
        assert!(parse_ogm(&bytes[..20]).is_none());
    }

    #[test]
    fn scaling() {
        assert_eq!(scale_to_u8(&[0.0, 0.5, 1.0]), [0, 128, 255]);
        assert_eq!(scale_to_u8(&[2.0, 2.0]), [128, 128]);
    }
}
