//! Per-cell context channels.
//!
//! A deterministic stand-in for learned grid queries: every cell gets a short
//! vector of map and agent features computed from the normalized scene.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::geometry::{dist, segment_geometry, Polyline};
use super::{LaneSegment, SceneContext};
use crate::grid::{CellIndex, GridSpec, Window};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RasterConfig {
    pub lane_width: f64,
    /// Clamp for the signed centerline distance, meters.
    pub max_centerline_distance: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            lane_width: 3.5,
            max_centerline_distance: 5.0,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
        }
    }
}

/// `rows x cols x F` channels, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    rows: usize,
    cols: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureStack {
    pub const CHANNELS: usize = 6;
    pub const ON_ROAD: usize = 0;
    pub const CENTERLINE_DISTANCE: usize = 1;
    pub const HEADING_ALIGNMENT: usize = 2;
    pub const AGENT_OCCUPANCY: usize = 3;
    pub const PROGRESS: usize = 4;
    pub const ANCHOR_DISTANCE: usize = 5;

    /// A stack with the raster channel layout.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_channels(rows, cols, Self::CHANNELS, values)
    }

    /// A stack with an arbitrary channel count, e.g. per-cell indicators.
    pub fn with_channels(
        rows: usize,
        cols: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 || values.len() != rows * cols * channels {
            return Err(Error::Shape(alloc::format!(
                "feature stack needs {} values, got {}",
                rows * cols * channels,
                values.len()
            )));
        }
        Ok(FeatureStack {
            rows,
            cols,
            channels,
            values,
        })
    }

    /// One indicator channel per cell, so a linear map is a free per-cell reward.
    pub fn one_hot(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        FeatureStack {
            rows,
            cols,
            channels: n,
            values,
        }
    }

    /// Every cell set to the same channel vector.
    pub fn constant(rows: usize, cols: usize, channels: [f64; Self::CHANNELS]) -> Self {
        let values = (0..rows * cols).flat_map(|_| channels).collect();
        FeatureStack {
            rows,
            cols,
            channels: Self::CHANNELS,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, flat: usize) -> &[f64] {
        &self.values[flat * self.channels..(flat + 1) * self.channels]
    }

    pub fn get(&self, cell: CellIndex, channel: usize) -> f64 {
        self.values[(cell.row * self.cols + cell.col) * self.channels + channel]
    }

    /// One channel as a `rows x cols` field.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn crop(&self, window: &Window, parent: &GridSpec) -> FeatureStack {
        FeatureStack {
            rows: window.spec.rows(),
            cols: window.spec.cols(),
            channels: self.channels,
            values: window.crop(parent, &self.values, self.channels),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Picks the lane the target drives in and chains its successors.
fn target_route(lanes: &[Vec<LaneSegment>], lane_width: f64) -> Option<Polyline> {
    let aligned = |seg: &LaneSegment| libm::cos(seg.heading) > 0.5;
    let mut best: Option<(f64, usize)> = None;
    for (i, lane) in lanes.iter().enumerate() {
        for seg in lane.iter().filter(|s| aligned(s)) {
            let d = libm::sqrt(segment_geometry(seg.start, seg.end, [0.0, 0.0]).0);
            if d <= lane_width * 0.5 && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
    }
    let (_, mut current) = best?;
    let mut visited = vec![current];
    let mut segments: Vec<LaneSegment> = lanes[current].clone();
    loop {
        let tail = *lanes[current].last()?;
        let next = lanes
            .iter()
            .enumerate()
            .filter(|(j, lane)| {
                !visited.contains(j)
                    && lane.first().is_some_and(|head| {
                        dist(head.start, tail.end) < 0.5
                            && libm::cos(head.heading - tail.heading) > 0.5
                    })
            })
            .min_by(|(_, a), (_, b)| {
                dist(a[0].start, tail.end).total_cmp(&dist(b[0].start, tail.end))
            })
            .map(|(j, _)| j);
        match next {
            Some(j) => {
                visited.push(j);
                segments.extend_from_slice(&lanes[j]);
                current = j;
            }
            None => break,
        }
    }
    Some(Polyline::from_segments(&segments))
}

fn in_box(p: [f64; 2], center: [f64; 2], heading: f64, half_len: f64, half_wid: f64) -> bool {
    let (s, c) = libm::sincos(heading);
    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
    let lon = c * dx + s * dy;
    let lat = -s * dx + c * dy;
    lon.abs() <= half_len && lat.abs() <= half_wid
}

pub fn rasterize_features(
    scene: &SceneContext,
    spec: &GridSpec,
    cfg: &RasterConfig,
) -> Result<FeatureStack> {
    if !scene.is_normalized(1e-6) {
        return Err(Error::Scene(
            "features need a target-normalized scene".to_string(),
        ));
    }
    let segments: Vec<&LaneSegment> = scene.lanes.iter().flatten().collect();
    let route = target_route(&scene.lanes, cfg.lane_width);
    let route_origin = route
        .as_ref()
        .and_then(|r| r.project([0.0, 0.0]))
        .map_or(0.0, |p| p.s);
    let others: Vec<_> = scene
        .agents
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != scene.target_index)
        .filter_map(|(_, track)| track.last().filter(|s| s.valid).copied())
        .collect();

    let half_lane = cfg.lane_width * 0.5;
    let max_d = cfg.max_centerline_distance;
    let mut values = Vec::with_capacity(spec.len() * FeatureStack::CHANNELS);
    for flat in 0..spec.len() {
        let cell = spec.cell_at(flat);
        let p = spec.center(cell);

        let mut nearest: Option<(f64, f64, f64)> = None;
        for seg in &segments {
            let (d2, _, cross) = segment_geometry(seg.start, seg.end, p);
            if nearest.is_none_or(|(bd, _, _)| d2 < bd) {
                nearest = Some((d2, cross, seg.heading));
            }
        }
        let (on_road, signed, align) = match nearest {
            Some((d2, cross, heading)) => {
                let d = libm::sqrt(d2);
                let signed = if cross >= 0.0 { d } else { -d };
                let align = if d <= max_d { libm::cos(heading) } else { 0.0 };
                (
                    if d <= half_lane { 1.0 } else { 0.0 },
                    signed.clamp(-max_d, max_d),
                    align,
                )
            }
            None => (0.0, max_d, 0.0),
        };

        let occupied = others.iter().any(|a| {
            spec.world_to_cell(a.position) == Some(cell)
                || in_box(
                    p,
                    a.position,
                    a.heading,
                    cfg.vehicle_length * 0.5,
                    cfg.vehicle_width * 0.5,
                )
        });

        let progress = route
            .as_ref()
            .and_then(|r| r.project(p))
            .filter(|proj| proj.lateral.abs() <= half_lane)
            .map_or(0.0, |proj| proj.s - route_origin);

        values.extend_from_slice(&[
            on_road,
            signed,
            align,
            if occupied { 1.0 } else { 0.0 },
            progress,
            libm::hypot(p[0], p[1]),
        ]);
    }
    Ok(FeatureStack {
        rows: spec.rows(),
        cols: spec.cols(),
        channels: FeatureStack::CHANNELS,
        values,
    })
}
