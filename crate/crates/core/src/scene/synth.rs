//! Deterministic synthetic driving scenes.
//!
//! Each scene is laid out in a local frame where the target sits at the
//! origin facing `+x`, then moved to a random global pose so that
//! normalization has real work to do.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use super::geometry::{PathBuilder, Polyline};
use super::{AgentState, Pose2, ScenarioKind, SceneContext};
use crate::rng::Stream;
use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub history_len: usize,
    pub future_len: usize,
    pub dt: f64,
    pub lane_width: f64,
    pub segments_per_lane: usize,
    /// Overrides the sampled target speed, m/s.
    pub speed: Option<f64>,
    /// Place the scene at a random global pose.
    pub random_pose: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            history_len: 20,
            future_len: 30,
            dt: 0.1,
            lane_width: 3.5,
            segments_per_lane: 20,
            speed: None,
            random_pose: true,
        }
    }
}

const BEHIND: f64 = 60.0;

enum Motion {
    Constant {
        v: f64,
    },
    Stop {
        v: f64,
        t_stop: f64,
    },
    LaneChange {
        v: f64,
        offset: f64,
        t0: f64,
        duration: f64,
    },
}

impl Motion {
    /// Arc length travelled since `t = 0` (negative in the past).
    fn s(&self, t: f64) -> f64 {
        match *self {
            Motion::Constant { v } | Motion::LaneChange { v, .. } => v * t,
            Motion::Stop { v, t_stop } => {
                if t <= 0.0 {
                    v * t
                } else {
                    let tc = t.min(t_stop);
                    v * tc - 0.5 * (v / t_stop) * tc * tc
                }
            }
        }
    }

    fn lateral(&self, t: f64) -> f64 {
        match *self {
            Motion::LaneChange {
                offset,
                t0,
                duration,
                ..
            } => {
                let u = ((t - t0) / duration).clamp(0.0, 1.0);
                offset * 0.5 * (1.0 - libm::cos(PI * u))
            }
            _ => 0.0,
        }
    }
}

struct Layout {
    /// Lane centerlines with their lane-type flag.
    lanes: Vec<(Polyline, f64)>,
    route: Polyline,
    /// Indices into `lanes` where other traffic may be placed.
    traffic_lanes: Vec<usize>,
    motion: Motion,
    /// Arc-length window on traffic lanes kept clear of other agents.
    clear_zone: Option<(usize, f64, f64)>,
}

fn straight_lane(y: f64, heading: f64, length: f64) -> Polyline {
    let start = if heading.abs() < FRAC_PI_2 {
        [-BEHIND, y]
    } else {
        [length - BEHIND, y]
    };
    PathBuilder::new(start, heading).straight(length).build()
}

fn layout(kind: ScenarioKind, cfg: &SynthConfig, rng: &mut Stream) -> Layout {
    let w = cfg.lane_width;
    let speed = |rng: &mut Stream, lo: f64, hi: f64| cfg.speed.unwrap_or_else(|| rng.range(lo, hi));
    match kind {
        ScenarioKind::Straight => {
            let v = speed(rng, 6.0, 10.0);
            let route = straight_lane(0.0, 0.0, 200.0);
            Layout {
                lanes: vec![
                    (route.clone(), 0.0),
                    (straight_lane(w, 0.0, 200.0), 0.0),
                    (straight_lane(-w, 0.0, 200.0), 0.0),
                ],
                route,
                traffic_lanes: vec![1, 2],
                motion: Motion::Constant { v },
                clear_zone: None,
            }
        }
        ScenarioKind::Curve => {
            let v = speed(rng, 6.0, 9.0);
            let radius = rng.range(40.0, 80.0);
            let side = if rng.coin() { 1.0 } else { -1.0 };
            let route = PathBuilder::new([-BEHIND, 0.0], 0.0)
                .straight(BEHIND)
                .arc(radius, side * 110.0 / radius)
                .build();
            Layout {
                lanes: vec![
                    (route.clone(), 0.0),
                    (route.offset(w), 0.0),
                    (route.offset(-w), 0.0),
                ],
                route,
                traffic_lanes: vec![1, 2],
                motion: Motion::Constant { v },
                clear_zone: None,
            }
        }
        ScenarioKind::IntersectionLeft | ScenarioKind::IntersectionRight => {
            let left = kind == ScenarioKind::IntersectionLeft;
            let side = if left { 1.0 } else { -1.0 };
            let v = speed(rng, 5.0, 8.0);
            let entry = rng.range(6.0, 12.0);
            let radius = if left {
                rng.range(9.0, 12.0)
            } else {
                rng.range(5.0, 7.5)
            };
            let approach = PathBuilder::new([-BEHIND, 0.0], 0.0)
                .straight(BEHIND + entry)
                .build();
            let connector = PathBuilder::new([entry, 0.0], 0.0)
                .arc(radius, side * FRAC_PI_2)
                .build();
            let cross_x = entry + radius;
            let exit = PathBuilder::new([cross_x, side * radius], side * FRAC_PI_2)
                .straight(80.0)
                .build();
            let route = PathBuilder::new([-BEHIND, 0.0], 0.0)
                .straight(BEHIND + entry)
                .arc(radius, side * FRAC_PI_2)
                .straight(80.0)
                .build();
            let through_y = -side * w;
            let opposing_y = if left { w } else { 2.0 * w };
            let cross_in = PathBuilder::new([cross_x, -side * 40.0], side * FRAC_PI_2)
                .straight(40.0 + radius)
                .build();
            let cross_back =
                PathBuilder::new([cross_x - side * w, side * 100.0], -side * FRAC_PI_2)
                    .straight(140.0)
                    .build();
            Layout {
                lanes: vec![
                    (approach, 0.0),
                    (connector, 1.0),
                    (exit, 0.0),
                    (straight_lane(through_y, 0.0, 200.0), 0.0),
                    (straight_lane(opposing_y, PI, 200.0), 0.0),
                    (cross_in, 0.0),
                    (cross_back, 0.0),
                ],
                route,
                traffic_lanes: vec![3, 4, 6],
                motion: Motion::Constant { v },
                clear_zone: None,
            }
        }
        ScenarioKind::LaneChange => {
            let v = speed(rng, 6.0, 10.0);
            let side = if rng.coin() { 1.0 } else { -1.0 };
            let t0 = rng.range(0.0, 0.4);
            let duration = rng.range(2.0, 2.5);
            let route = straight_lane(0.0, 0.0, 200.0);
            let lanes = vec![
                (route.clone(), 0.0),
                (straight_lane(w, 0.0, 200.0), 0.0),
                (straight_lane(-w, 0.0, 200.0), 0.0),
            ];
            let dest = if side > 0.0 { 1 } else { 2 };
            Layout {
                lanes,
                route,
                traffic_lanes: vec![1, 2],
                motion: Motion::LaneChange {
                    v,
                    offset: side * w,
                    t0,
                    duration,
                },
                clear_zone: Some((dest, BEHIND - 30.0, BEHIND + 45.0)),
            }
        }
        ScenarioKind::Stop => {
            let v = speed(rng, 6.0, 9.0);
            let t_stop = rng.range(1.5, 2.4);
            let route = straight_lane(0.0, 0.0, 200.0);
            Layout {
                lanes: vec![
                    (route.clone(), 0.0),
                    (straight_lane(w, 0.0, 200.0), 0.0),
                    (straight_lane(-w, 0.0, 200.0), 0.0),
                ],
                route,
                traffic_lanes: vec![1, 2],
                motion: Motion::Stop { v, t_stop },
                clear_zone: None,
            }
        }
    }
}

/// Samples a track along `line` with arc length `s(t)` and lateral offset
/// `e(t)` at the given times.
fn sample_track(
    line: &Polyline,
    s0: f64,
    s: impl Fn(f64) -> f64,
    e: impl Fn(f64) -> f64,
    times: impl Iterator<Item = f64>,
) -> Vec<AgentState> {
    let pos = |t: f64| line.offset_point(s0 + s(t), e(t));
    times
        .map(|t| {
            let h = 1e-4;
            let (a, b) = (pos(t - h), pos(t + h));
            let velocity = [(b[0] - a[0]) / (2.0 * h), (b[1] - a[1]) / (2.0 * h)];
            let speed = libm::hypot(velocity[0], velocity[1]);
            let heading = if speed > 1e-3 {
                libm::atan2(velocity[1], velocity[0])
            } else {
                line.heading_at(s0 + s(t))
            };
            let velocity = if speed > 1e-3 { velocity } else { [0.0, 0.0] };
            AgentState {
                position: pos(t),
                velocity,
                heading,
                valid: true,
            }
        })
        .collect()
}

/// Generates a scene with default settings.
pub fn generate_scene(kind: ScenarioKind, seed: u64) -> SceneContext {
    generate_scene_with(kind, seed, &SynthConfig::default())
}

pub fn generate_scene_with(kind: ScenarioKind, seed: u64, cfg: &SynthConfig) -> SceneContext {
    let kind_index = ScenarioKind::ALL.iter().position(|k| *k == kind).unwrap() as u64;
    let mut rng = Stream::new(seed, kind_index);
    let layout = layout(kind, cfg, &mut rng);
    let dt = cfg.dt;
    let t_h = cfg.history_len;
    let t_f = cfg.future_len;
    let past = || (0..t_h).map(move |k| -((t_h - 1 - k) as f64) * dt);
    let future = |n: usize| (1..=n).map(move |k| k as f64 * dt);

    let motion = &layout.motion;
    let target_history = sample_track(
        &layout.route,
        BEHIND,
        |t| motion.s(t),
        |t| motion.lateral(t),
        past(),
    );
    let ext_track = sample_track(
        &layout.route,
        BEHIND,
        |t| motion.s(t),
        |t| motion.lateral(t),
        future(2 * t_f),
    );
    let extended: Vec<Point> = ext_track.iter().map(|s| s.position).collect();
    let gt_future = extended[..t_f].to_vec();

    let mut agents = vec![target_history];
    let mut agent_futures = vec![gt_future.clone()];

    if let Motion::Stop { v, t_stop } = layout.motion {
        let stop_s = 0.5 * v * t_stop;
        let lead_s = BEHIND + stop_s + rng.range(5.5, 7.5);
        let hold = |_: f64| 0.0;
        agents.push(sample_track(&layout.route, lead_s, hold, hold, past()));
        agent_futures.push(
            sample_track(&layout.route, lead_s, hold, hold, future(t_f))
                .iter()
                .map(|s| s.position)
                .collect(),
        );
    }

    let n_traffic = 1 + rng.index(3);
    for _ in 0..n_traffic {
        let lane_idx = layout.traffic_lanes[rng.index(layout.traffic_lanes.len())];
        let line = &layout.lanes[lane_idx].0;
        let v = rng.range(4.0, 10.0);
        let mut s0 = rng.range(20.0, line.length() - 60.0);
        if let Some((lane, lo, hi)) = layout.clear_zone {
            if lane == lane_idx && s0 > lo && s0 < hi {
                s0 = if rng.coin() { lo } else { hi };
            }
        }
        let drive = move |t: f64| v * t;
        let zero = |_: f64| 0.0;
        let mut history = sample_track(line, s0, drive, zero, past());
        if rng.uniform() < 0.3 {
            let missing = 1 + rng.index(t_h / 2);
            for state in history.iter_mut().take(missing) {
                *state = AgentState::default();
            }
        }
        agents.push(history);
        agent_futures.push(
            sample_track(line, s0, drive, zero, future(t_f))
                .iter()
                .map(|s| s.position)
                .collect(),
        );
    }

    let lanes = layout
        .lanes
        .iter()
        .map(|(line, lane_type)| line.to_segments(cfg.segments_per_lane, *lane_type))
        .collect();

    let local = SceneContext {
        kind,
        dt,
        agents,
        lanes,
        target_index: 0,
        gt_future,
        extended_future: Some(extended),
        agent_futures,
        frame: Pose2::IDENTITY,
    };
    if !cfg.random_pose {
        return local;
    }
    let pose = Pose2 {
        x: rng.range(-500.0, 500.0),
        y: rng.range(-500.0, 500.0),
        theta: rng.range(-PI, PI),
    };
    let mut raw = local.transformed(&pose);
    raw.frame = Pose2::IDENTITY;
    raw
}
