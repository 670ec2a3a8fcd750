//! Grid rollouts (GRTs) and their conversion to metric trajectories.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{CellIndex, GridSpec};
use crate::irl::{PolicySchedule, RewardField};
use crate::rng::Stream;
use crate::scene::{FeatureStack, Polyline};
use crate::{Error, Point, Result};

/// `L` sampled grid paths, each `horizon + 1` cells including the start.
#[derive(Debug, Clone, PartialEq)]
pub struct GRTSet {
    pub paths: Vec<Vec<CellIndex>>,
    /// Sum of the (shifted) reward over entered cells.
    pub path_reward: Vec<f64>,
}

impl GRTSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Ancestral sampling from `policy`. Rollout `l` draws from its own stream
/// `(seed, l)`, so results do not depend on evaluation order.
pub fn sample_rollouts(
    policy: &PolicySchedule,
    reward: &RewardField,
    start: CellIndex,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<GRTSet> {
    let spec = policy.spec();
    if count == 0 {
        return Err(Error::InvalidArgument(
            "rollout count must be positive".into(),
        ));
    }
    if horizon > policy.horizon() {
        return Err(Error::InvalidArgument(alloc::format!(
            "rollout horizon {horizon} exceeds policy horizon {}",
            policy.horizon()
        )));
    }
    if start.row >= spec.rows() || start.col >= spec.cols() {
        return Err(Error::OutOfBounds {
            row: start.row as i64,
            col: start.col as i64,
        });
    }
    if reward.rows() != spec.rows() || reward.cols() != spec.cols() {
        return Err(Error::Shape(
            "reward field does not match the policy grid".into(),
        ));
    }
    let r = reward.values();
    let mut paths = Vec::with_capacity(count);
    let mut path_reward = Vec::with_capacity(count);
    for l in 0..count {
        let mut rng = Stream::new(seed, l as u64);
        let mut flat = spec.flat(start);
        let mut path = Vec::with_capacity(horizon + 1);
        path.push(start);
        let mut total = 0.0;
        for t in 0..horizon {
            let a = rng
                .weighted(policy.row(t, flat))
                .expect("policy rows are normalized");
            flat = policy
                .successor(flat, a)
                .expect("sampled actions are valid");
            total += r[flat];
            path.push(spec.cell_at(flat));
        }
        paths.push(path);
        path_reward.push(total);
    }
    Ok(GRTSet { paths, path_reward })
}

/// Features of the cells entered along each path: `L x H x F`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningFeatures {
    pub paths: usize,
    pub steps: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ReasoningFeatures {
    pub fn at(&self, path: usize, step: usize) -> &[f64] {
        let f = self.channels;
        &self.values[(path * self.steps + step) * f..][..f]
    }
}

pub fn gather_reasoning_features(
    paths: &[Vec<CellIndex>],
    features: &FeatureStack,
) -> Result<ReasoningFeatures> {
    let steps = paths.first().map_or(0, |p| p.len().saturating_sub(1));
    let mut values = Vec::with_capacity(paths.len() * steps * features.channels());
    for path in paths {
        if path.len() != steps + 1 {
            return Err(Error::Shape("paths have different lengths".into()));
        }
        for &cell in &path[1..] {
            if cell.row >= features.rows() || cell.col >= features.cols() {
                return Err(Error::OutOfBounds {
                    row: cell.row as i64,
                    col: cell.col as i64,
                });
            }
            values.extend_from_slice(features.at(cell.row * features.cols() + cell.col));
        }
    }
    Ok(ReasoningFeatures {
        paths: paths.len(),
        steps,
        channels: features.channels(),
        values,
    })
}

/// Walks the polyline through the path's cell centers at constant `speed`,
/// producing the positions at `dt, 2 dt, ..., steps * dt`. Points past the
/// path end hold its last cell.
pub fn grt_to_trajectory(
    path: &[CellIndex],
    spec: &GridSpec,
    steps: usize,
    speed: f64,
    dt: f64,
) -> Result<Vec<Point>> {
    if path.is_empty() {
        return Err(Error::Empty("path"));
    }
    if !(speed.is_finite() && speed >= 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(
            "speed and dt must be finite, dt positive".into(),
        ));
    }
    let centers = path
        .iter()
        .map(|&c| spec.cell_to_world(c))
        .collect::<Result<Vec<_>>>()?;
    let line = Polyline::new(centers);
    Ok((1..=steps)
        .map(|j| line.point_at_clamped(speed * dt * j as f64))
        .collect())
}

/// Kinematic proposals for the reasoning-free baseline: each sample keeps
/// the current speed and heading, with a random constant yaw rate and
/// acceleration. Coordinates are target-centric.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSampler {
    pub yaw_rate: (f64, f64),
    pub accel: (f64, f64),
}

impl Default for KinematicSampler {
    fn default() -> Self {
        KinematicSampler {
            yaw_rate: (-0.5, 0.5),
            accel: (-3.0, 1.0),
        }
    }
}

impl KinematicSampler {
    pub fn sample(
        &self,
        count: usize,
        steps: usize,
        speed: f64,
        dt: f64,
        seed: u64,
    ) -> Vec<Vec<Point>> {
        (0..count)
            .map(|l| {
                let mut rng = Stream::new(seed, l as u64);
                let omega = rng.range(self.yaw_rate.0, self.yaw_rate.1);
                let accel = rng.range(self.accel.0, self.accel.1);
                let (mut x, mut y, mut theta, mut v) = (0.0, 0.0, 0.0, speed);
                let mut out = Vec::with_capacity(steps);
                for _ in 0..steps {
                    // Midpoint integration of the unicycle model.
                    let v_next = (v + accel * dt).max(0.0);
                    let v_mid = 0.5 * (v + v_next);
                    let th_mid = theta + 0.5 * omega * dt;
                    x += v_mid * libm::cos(th_mid) * dt;
                    y += v_mid * libm::sin(th_mid) * dt;
                    theta += omega * dt;
                    v = v_next;
                    out.push([x, y]);
                }
                out
            })
            .collect()
    }
}

/// Straight constant-velocity rollouts along +x.
pub fn constant_velocity(count: usize, steps: usize, speed: f64, dt: f64) -> Vec<Vec<Point>> {
    let one: Vec<Point> = (1..=steps).map(|j| [speed * dt * j as f64, 0.0]).collect();
    vec![one; count]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Action;
    use crate::irl::soft_value_iteration;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, CellIndex::new(n / 2, n / 2)).unwrap()
    }

    fn forward_policy(g: &GridSpec, h: usize) -> PolicySchedule {
        PolicySchedule::from_fn(*g, h, |_, c| {
            let mut w = [0.0; 9];
            w[if c.row + 1 < g.rows() {
                Action::Forward.index()
            } else {
                Action::Stay.index()
            }] = 1.0;
            w
        })
        .unwrap()
    }

    #[test]
    fn deterministic_policy_gives_identical_paths() {
        let g = spec(11);
        let p = forward_policy(&g, 4);
        let set = sample_rollouts(&p, &RewardField::uniform(11, 11), g.anchor(), 7, 4, 1).unwrap();
        assert_eq!(set.len(), 7);
        assert!(set.paths.iter().all(|q| q == &set.paths[0]));
        assert_eq!(set.paths[0][4], CellIndex::new(9, 5));
    }

    #[test]
    fn rollouts_are_reproducible_and_adjacent() {
        let g = spec(15);
        let raw: Vec<f64> = (0..g.len())
            .map(|f| -(((f * 37) % 11) as f64) / 5.0)
            .collect();
        let r = RewardField::from_raw(15, 15, raw).unwrap();
        let soft = soft_value_iteration(&r, &g, 6).unwrap();
        let a = sample_rollouts(&soft.policy, &r, g.anchor(), 50, 6, 9).unwrap();
        let b = sample_rollouts(&soft.policy, &r, g.anchor(), 50, 6, 9).unwrap();
        assert_eq!(a, b);
        for (path, &pr) in a.paths.iter().zip(&a.path_reward) {
            assert_eq!(path[0], g.anchor());
            assert!(path.windows(2).all(|w| w[0].chebyshev(w[1]) <= 1));
            let direct: f64 = path[1..].iter().map(|&c| r.values()[g.flat(c)]).sum();
            assert_eq!(direct, pr);
        }
        // A prefix of a larger batch equals the smaller batch.
        let c = sample_rollouts(&soft.policy, &r, g.anchor(), 80, 6, 9).unwrap();
        assert_eq!(&c.paths[..50], &a.paths[..]);
    }

    #[test]
    fn uniform_first_step_frequencies() {
        let g = spec(5);
        let r = RewardField::uniform(5, 5);
        let soft = soft_value_iteration(&r, &g, 1).unwrap();
        let n = 90_000;
        let set = sample_rollouts(&soft.policy, &r, g.anchor(), n, 1, 2024).unwrap();
        let mut counts = [0usize; 25];
        for p in &set.paths {
            counts[g.flat(p[1])] += 1;
        }
        let p = 1.0 / 9.0;
        let sigma = libm::sqrt(n as f64 * p * (1.0 - p));
        let reached: Vec<_> = counts.iter().filter(|&&c| c > 0).collect();
        assert_eq!(reached.len(), 9);
        for &&c in &reached {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn gather_matches_direct_indexing() {
        let g = spec(9);
        let values: Vec<f64> = (0..g.len() * 6).map(|i| i as f64 * 0.5).collect();
        let fs = FeatureStack::new(9, 9, values).unwrap();
        let r = RewardField::uniform(9, 9);
        let soft = soft_value_iteration(&r, &g, 3).unwrap();
        let set = sample_rollouts(&soft.policy, &r, g.anchor(), 20, 3, 3).unwrap();
        let gathered = gather_reasoning_features(&set.paths, &fs).unwrap();
        for (l, path) in set.paths.iter().enumerate() {
            for t in 0..3 {
                for ch in 0..6 {
                    assert_eq!(gathered.at(l, t)[ch], fs.get(path[t + 1], ch));
                }
            }
        }
        let constant = FeatureStack::constant(9, 9, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let gathered = gather_reasoning_features(&set.paths, &constant).unwrap();
        assert!(gathered
            .values
            .chunks(6)
            .all(|c| c == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn straight_path_at_ten_meters_per_second() {
        let g = GridSpec::new(128, 128, 1.0, CellIndex::new(32, 64)).unwrap();
        let path: Vec<CellIndex> = (0..=32).map(|i| CellIndex::new(32 + i, 64)).collect();
        let traj = grt_to_trajectory(&path, &g, 30, 10.0, 0.1).unwrap();
        assert_eq!(traj.len(), 30);
        for (j, p) in traj.iter().enumerate() {
            assert!((p[0] - (j + 1) as f64).abs() < 1e-12 && p[1] == 0.0);
        }
        assert_eq!(traj[29], [30.0, 0.0]);
    }

    #[test]
    fn stay_path_and_clamping() {
        let g = spec(21);
        let stay = vec![g.anchor(); 6];
        assert!(grt_to_trajectory(&stay, &g, 30, 8.0, 0.1)
            .unwrap()
            .iter()
            .all(|p| *p == [0.0, 0.0]));
        let short: Vec<CellIndex> = (0..4).map(|i| CellIndex::new(10 + i, 10)).collect();
        let traj = grt_to_trajectory(&short, &g, 30, 10.0, 0.1).unwrap();
        assert!(traj[3..].iter().all(|p| *p == [3.0, 0.0]));
    }

    #[test]
    fn kinematic_samples_start_at_current_speed() {
        let s = KinematicSampler::default().sample(16, 30, 10.0, 0.1, 4);
        assert_eq!(s.len(), 16);
        for traj in &s {
            let d0 = libm::hypot(traj[0][0], traj[0][1]);
            assert!(d0 > 0.8 && d0 < 1.1, "{d0}");
        }
        assert_ne!(s[0], s[1]);
        let cv = constant_velocity(3, 30, 10.0, 0.1);
        assert_eq!(cv[2][29], [30.0, 0.0]);
    }
}
