//! Vectorized driving scenes: agent histories, lane polylines, and futures.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Point, Result};

mod geometry;
mod raster;
mod synth;

pub use geometry::Polyline;
pub use raster::{rasterize_features, FeatureStack, RasterConfig};
pub use synth::{generate_scene, generate_scene_with, SynthConfig};

/// Per-timestamp agent channels: x, y, vx, vy, heading, valid.
pub const AGENT_CHANNELS: usize = 6;
/// Per-segment lane channels: x0, y0, x1, y1, heading, lane type.
pub const MAP_CHANNELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Straight,
    Curve,
    IntersectionLeft,
    IntersectionRight,
    LaneChange,
    Stop,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Straight,
        ScenarioKind::Curve,
        ScenarioKind::IntersectionLeft,
        ScenarioKind::IntersectionRight,
        ScenarioKind::LaneChange,
        ScenarioKind::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Straight => "straight",
            ScenarioKind::Curve => "curve",
            ScenarioKind::IntersectionLeft => "intersection_left",
            ScenarioKind::IntersectionRight => "intersection_right",
            ScenarioKind::LaneChange => "lane_change",
            ScenarioKind::Stop => "stop",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Scene(format!("unknown scenario kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentState {
    pub position: Point,
    pub velocity: Point,
    pub heading: f64,
    pub valid: bool,
}

impl AgentState {
    pub fn to_channels(&self) -> [f64; AGENT_CHANNELS] {
        [
            self.position[0],
            self.position[1],
            self.velocity[0],
            self.velocity[1],
            self.heading,
            if self.valid { 1.0 } else { 0.0 },
        ]
    }

    pub fn from_channels(c: [f64; AGENT_CHANNELS]) -> Self {
        AgentState {
            position: [c[0], c[1]],
            velocity: [c[2], c[3]],
            heading: c[4],
            valid: c[5] != 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        libm::hypot(self.velocity[0], self.velocity[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneSegment {
    pub start: Point,
    pub end: Point,
    pub heading: f64,
    /// 0 for an ordinary lane, 1 for an intersection connector.
    pub lane_type: f64,
}

impl LaneSegment {
    pub fn to_channels(&self) -> [f64; MAP_CHANNELS] {
        [
            self.start[0],
            self.start[1],
            self.end[0],
            self.end[1],
            self.heading,
            self.lane_type,
        ]
    }

    pub fn from_channels(c: [f64; MAP_CHANNELS]) -> Self {
        LaneSegment {
            start: [c[0], c[1]],
            end: [c[2], c[3]],
            heading: c[4],
            lane_type: c[5],
        }
    }
}

/// Rigid transform `p -> R(theta) p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn apply(&self, p: Point) -> Point {
        let (s, c) = libm::sincos(self.theta);
        [c * p[0] - s * p[1] + self.x, s * p[0] + c * p[1] + self.y]
    }

    pub fn rotate(&self, v: Point) -> Point {
        let (s, c) = libm::sincos(self.theta);
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn inverse(&self) -> Pose2 {
        let back = Pose2 {
            x: 0.0,
            y: 0.0,
            theta: -self.theta,
        }
        .apply([-self.x, -self.y]);
        Pose2 {
            x: back[0],
            y: back[1],
            theta: -self.theta,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.apply([other.x, other.y]);
        Pose2 {
            x: t[0],
            y: t[1],
            theta: wrap_angle(self.theta + other.theta),
        }
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = libm::fmod(a, 2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub kind: ScenarioKind,
    /// Sampling interval shared by history and futures, seconds.
    pub dt: f64,
    /// `N_a` tracks of `T_h` states; the last state is the current one.
    pub agents: Vec<Vec<AgentState>>,
    /// `N_m` lanes of `N_s` segments each.
    pub lanes: Vec<Vec<LaneSegment>>,
    pub target_index: usize,
    pub gt_future: Vec<Point>,
    pub extended_future: Option<Vec<Point>>,
    /// Future positions of every agent (`T_f` each), index-aligned with
    /// `agents`. Empty when the scene carries no multi-agent futures.
    pub agent_futures: Vec<Vec<Point>>,
    /// Maps the scene's current coordinates back to the raw frame.
    pub frame: Pose2,
}

impl SceneContext {
    pub fn history_len(&self) -> usize {
        self.agents.first().map_or(0, Vec::len)
    }

    pub fn future_len(&self) -> usize {
        self.gt_future.len()
    }

    pub fn target_current(&self) -> Option<&AgentState> {
        self.agents
            .get(self.target_index)?
            .last()
            .filter(|s| s.valid)
    }

    /// Target speed at the current timestamp.
    pub fn current_speed(&self) -> f64 {
        self.target_current().map_or(0.0, AgentState::speed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::Scene("no agents".to_string()));
        }
        if self.target_index >= self.agents.len() {
            return Err(Error::Scene(format!(
                "target_index {} out of range for {} agents",
                self.target_index,
                self.agents.len()
            )));
        }
        let t_h = self.history_len();
        if t_h == 0 || self.agents.iter().any(|a| a.len() != t_h) {
            return Err(Error::Scene(
                "agent histories must share a non-zero length".to_string(),
            ));
        }
        if let Some(n_s) = self.lanes.first().map(Vec::len) {
            if n_s == 0 || self.lanes.iter().any(|l| l.len() != n_s) {
                return Err(Error::Scene(
                    "lanes must share a non-zero segment count".to_string(),
                ));
            }
        }
        let t_f = self.gt_future.len();
        if t_f == 0 {
            return Err(Error::Scene("empty gt_future".to_string()));
        }
        if let Some(ext) = &self.extended_future {
            let ok = ext.len() == t_f || 2 * ext.len() == 3 * t_f || ext.len() == 2 * t_f;
            if !ok {
                return Err(Error::Scene(format!(
                    "extended_future has {} points, expected 1x, 1.5x or 2x of {t_f}",
                    ext.len()
                )));
            }
        }
        if !self.agent_futures.is_empty() && self.agent_futures.len() != self.agents.len() {
            return Err(Error::Scene(
                "agent_futures must align with agents".to_string(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Scene("dt must be positive".to_string()));
        }
        Ok(())
    }

    /// Applies `pose` to every coordinate in the scene.
    fn transformed(&self, pose: &Pose2) -> SceneContext {
        let pts = |v: &Vec<Point>| v.iter().map(|&p| pose.apply(p)).collect::<Vec<_>>();
        let agents = self
            .agents
            .iter()
            .map(|track| {
                track
                    .iter()
                    .map(|s| {
                        if !s.valid {
                            return *s;
                        }
                        AgentState {
                            position: pose.apply(s.position),
                            velocity: pose.rotate(s.velocity),
                            heading: wrap_angle(s.heading + pose.theta),
                            valid: true,
                        }
                    })
                    .collect()
            })
            .collect();
        let lanes = self
            .lanes
            .iter()
            .map(|lane| {
                lane.iter()
                    .map(|seg| LaneSegment {
                        start: pose.apply(seg.start),
                        end: pose.apply(seg.end),
                        heading: wrap_angle(seg.heading + pose.theta),
                        lane_type: seg.lane_type,
                    })
                    .collect()
            })
            .collect();
        SceneContext {
            kind: self.kind,
            dt: self.dt,
            agents,
            lanes,
            target_index: self.target_index,
            gt_future: pts(&self.gt_future),
            extended_future: self.extended_future.as_ref().map(pts),
            agent_futures: self.agent_futures.iter().map(pts).collect(),
            frame: self.frame.compose(&pose.inverse()),
        }
    }

    /// Target-centric frame: the target's current position becomes the
    /// origin and its heading `+x`. The inverse is accumulated in `frame`.
    pub fn normalize_to_target(&self) -> Result<SceneContext> {
        let cur = *self
            .target_current()
            .ok_or_else(|| Error::Scene("missing target state".to_string()))?;
        let to_target = Pose2 {
            x: cur.position[0],
            y: cur.position[1],
            theta: cur.heading,
        }
        .inverse();
        let mut out = self.transformed(&to_target);
        // Pin the target pose exactly; the transform leaves only rounding noise.
        if let Some(s) = out.agents[out.target_index].last_mut() {
            s.position = [0.0, 0.0];
            s.heading = 0.0;
        }
        Ok(out)
    }

    /// Whether the target already sits at the origin facing `+x`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.target_current().is_some_and(|s| {
            s.position[0].abs() <= tol
                && s.position[1].abs() <= tol
                && wrap_angle(s.heading).abs() <= tol
        })
    }

    /// Maps target-frame points back to the raw frame.
    pub fn to_raw(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|&p| self.frame.apply(p)).collect()
    }

    /// Ground-truth states used for demonstrations: the current position
    /// followed by the first `steps` future positions (from `gt_future`, then
    /// `extended_future` when longer).
    pub fn demo_points(&self, steps: usize) -> Result<Vec<Point>> {
        let source = if steps <= self.gt_future.len() {
            &self.gt_future
        } else {
            self.extended_future
                .as_ref()
                .filter(|e| e.len() >= steps)
                .ok_or_else(|| Error::Scene(format!("no future with {steps} timestamps")))?
        };
        let cur = self
            .target_current()
            .ok_or_else(|| Error::Scene("missing target state".to_string()))?;
        let mut pts = Vec::with_capacity(steps + 1);
        pts.push(cur.position);
        pts.extend_from_slice(&source[..steps]);
        Ok(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_inverse_and_compose() {
        let p = Pose2 {
            x: 3.0,
            y: -2.0,
            theta: 0.7,
        };
        let q = p.compose(&p.inverse());
        assert!(q.x.abs() < 1e-12 && q.y.abs() < 1e-12 && q.theta.abs() < 1e-12);
        let pt = [1.5, 4.0];
        let back = p.inverse().apply(p.apply(pt));
        assert!((back[0] - pt[0]).abs() < 1e-12 && (back[1] - pt[1]).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.as_str().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("merge".parse::<ScenarioKind>().is_err());
    }
}
