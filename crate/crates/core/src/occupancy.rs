//! Spatio-temporal occupancy grids.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{CellIndex, GridSpec};
use crate::irl::{expected_visitation, PolicySchedule, VisitationField};
use crate::scene::SceneContext;
use crate::{Error, Result};

/// Binary occupancy, `steps x rows x cols`, timestamp-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct STOccupancy {
    pub rows: usize,
    pub cols: usize,
    pub steps: usize,
    pub data: Vec<u8>,
}

/// Occupancy probabilities in the same layout as [`STOccupancy`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbOccupancy {
    pub rows: usize,
    pub cols: usize,
    pub steps: usize,
    pub data: Vec<f64>,
}

impl STOccupancy {
    pub fn zeros(rows: usize, cols: usize, steps: usize) -> Self {
        STOccupancy {
            rows,
            cols,
            steps,
            data: vec![0; rows * cols * steps],
        }
    }

    pub fn slice(&self, t: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, cell: CellIndex) -> u8 {
        self.data[(t * self.rows + cell.row) * self.cols + cell.col]
    }
}

impl ProbOccupancy {
    /// Every cell at probability `p`.
    pub fn constant(rows: usize, cols: usize, steps: usize, p: f64) -> Self {
        ProbOccupancy {
            rows,
            cols,
            steps,
            data: vec![p; rows * cols * steps],
        }
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, cell: CellIndex) -> f64 {
        self.data[(t * self.rows + cell.row) * self.cols + cell.col]
    }

    pub fn mass(&self, t: usize) -> f64 {
        self.slice(t).iter().sum()
    }

    /// Applies `f` to each timestamp slice (e.g. embedding a window into a
    /// larger grid).
    pub fn map_slices(
        &self,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols * self.steps);
        for t in 0..self.steps {
            let s = f(self.slice(t));
            if s.len() != rows * cols {
                return Err(Error::Shape("mapped slice has the wrong size".into()));
            }
            data.extend(s);
        }
        Ok(ProbOccupancy {
            rows,
            cols,
            steps: self.steps,
            data,
        })
    }
}

/// Marks the cell of every agent's future position per timestamp. Uses
/// `agent_futures` when present, else the target's `gt_future`.
pub fn rasterize_gt_ogm(scene: &SceneContext, spec: &GridSpec, steps: usize) -> STOccupancy {
    let mut ogm = STOccupancy::zeros(spec.rows(), spec.cols(), steps);
    let target_only = [scene.gt_future.clone()];
    let futures: &[Vec<crate::Point>] = if scene.agent_futures.is_empty() {
        if scene.gt_future.is_empty() {
            &[]
        } else {
            &target_only
        }
    } else {
        &scene.agent_futures
    };
    let n = spec.len();
    for future in futures {
        for (t, &p) in future.iter().take(steps).enumerate() {
            if let Some(cell) = spec.world_to_cell(p) {
                ogm.data[t * n + spec.flat(cell)] = 1;
            }
        }
    }
    ogm
}

/// Linear interpolation of per-step visitations onto `steps` forecast
/// timestamps; timestamp `j` (1-based) reads planning time `j * H / steps`.
pub fn occupancy_from_visitation(
    field: &VisitationField,
    rows: usize,
    cols: usize,
    steps: usize,
) -> Result<ProbOccupancy> {
    let h = field.horizon();
    let times: Vec<f64> = (1..=steps).map(|j| (j * h) as f64 / steps as f64).collect();
    occupancy_at_times(field, rows, cols, &times)
}

/// Planning times for a target covering `cells_per_step` grid cells per
/// forecast timestamp, capped at the horizon.
pub fn paced_times(steps: usize, horizon: usize, cells_per_step: f64) -> Vec<f64> {
    (1..=steps)
        .map(|j| (j as f64 * cells_per_step).min(horizon as f64))
        .collect()
}

/// Visitations linearly interpolated at arbitrary planning times in `[0, H]`.
pub fn occupancy_at_times(
    field: &VisitationField,
    rows: usize,
    cols: usize,
    times: &[f64],
) -> Result<ProbOccupancy> {
    if times.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one forecast step".into(),
        ));
    }
    if rows * cols != field.cells() {
        return Err(Error::Shape(
            "grid size does not match the visitation field".into(),
        ));
    }
    let h = field.horizon();
    if times.iter().any(|&t| !(0.0..=h as f64).contains(&t)) {
        return Err(Error::InvalidArgument(
            "forecast time outside the planning horizon".into(),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols * times.len());
    for &tau in times {
        let lo = (libm::floor(tau) as usize).min(h);
        let hi = (lo + 1).min(h);
        let frac = tau - lo as f64;
        let (a, b) = (field.step(lo), field.step(hi));
        if frac == 0.0 {
            data.extend_from_slice(a);
        } else {
            data.extend(a.iter().zip(b).map(|(x, y)| (1.0 - frac) * x + frac * y));
        }
    }
    Ok(ProbOccupancy {
        rows,
        cols,
        steps: times.len(),
        data,
    })
}

pub fn predict_occupancy(
    policy: &PolicySchedule,
    start: CellIndex,
    horizon: usize,
    steps: usize,
) -> Result<ProbOccupancy> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let field = expected_visitation(policy, start, horizon)?;
    occupancy_from_visitation(&field, policy.spec().rows(), policy.spec().cols(), steps)
}

pub const FOCAL_GAMMA: f64 = 2.0;
pub const FOCAL_ALPHA: f64 = 0.25;
const P_FLOOR: f64 = 1e-6;

/// Mean focal binary cross-entropy over all cells and timestamps.
pub fn focal_bce(pred: &ProbOccupancy, gt: &STOccupancy, gamma: f64, alpha: f64) -> Result<f64> {
    if (pred.rows, pred.cols, pred.steps) != (gt.rows, gt.cols, gt.steps) {
        return Err(Error::Shape(
            "prediction and ground truth shapes differ".into(),
        ));
    }
    if !(gamma >= 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(
            "focal loss needs gamma >= 0 and alpha in (0, 1)".into(),
        ));
    }
    if pred.data.is_empty() {
        return Err(Error::Empty("occupancy"));
    }
    let mut total = 0.0;
    for (&p, &y) in pred.data.iter().zip(&gt.data) {
        let p = p.clamp(P_FLOOR, 1.0 - P_FLOOR);
        total += if y != 0 {
            -alpha * libm::pow(1.0 - p, gamma) * libm::log(p)
        } else {
            -(1.0 - alpha) * libm::pow(p, gamma) * libm::log(1.0 - p)
        };
    }
    Ok(total / pred.data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Action;
    use crate::irl::{soft_value_iteration, RewardField};
    use crate::scene::{generate_scene_with, ScenarioKind, SynthConfig};

    fn spec() -> GridSpec {
        GridSpec::new(64, 64, 1.0, CellIndex::new(16, 32)).unwrap()
    }

    fn straight(speed: f64) -> SceneContext {
        let cfg = SynthConfig {
            speed: Some(speed),
            random_pose: false,
            ..SynthConfig::default()
        };
        let mut s = generate_scene_with(ScenarioKind::Straight, 1, &cfg)
            .normalize_to_target()
            .unwrap();
        s.agents.truncate(1);
        s.target_index = 0;
        s.agent_futures.truncate(1);
        s
    }

    #[test]
    fn stationary_target_occupies_one_cell() {
        let mut s = straight(0.0);
        s.gt_future = vec![[0.0, 0.0]; 30];
        s.agent_futures = vec![];
        let ogm = rasterize_gt_ogm(&s, &spec(), 30);
        for t in 0..30 {
            assert_eq!(ogm.slice(t).iter().map(|&v| v as usize).sum::<usize>(), 1);
            assert_eq!(ogm.get(t, spec().anchor()), 1);
        }
    }

    #[test]
    fn no_futures_is_empty() {
        let mut s = straight(5.0);
        s.gt_future.clear();
        s.agent_futures.clear();
        assert!(rasterize_gt_ogm(&s, &spec(), 30)
            .data
            .iter()
            .all(|&v| v == 0));
    }

    #[test]
    fn ten_meters_per_second_advances_one_cell_per_step() {
        let s = straight(10.0);
        let g = spec();
        let ogm = rasterize_gt_ogm(&s, &g, 30);
        let mut prev = g.anchor().row;
        for t in 0..30 {
            let cell = (0..g.len())
                .find(|&f| ogm.slice(t)[f] == 1)
                .map(|f| g.cell_at(f))
                .unwrap();
            assert_eq!(cell.col, g.anchor().col);
            assert_eq!(cell.row, prev + 1);
            prev = cell.row;
        }
    }

    #[test]
    fn rasterization_ignores_agent_order() {
        let cfg = SynthConfig {
            random_pose: false,
            ..SynthConfig::default()
        };
        let s = generate_scene_with(ScenarioKind::IntersectionLeft, 4, &cfg)
            .normalize_to_target()
            .unwrap();
        let mut r = s.clone();
        r.agent_futures.reverse();
        assert_eq!(
            rasterize_gt_ogm(&s, &spec(), 30),
            rasterize_gt_ogm(&r, &spec(), 30)
        );
    }

    #[test]
    fn deterministic_policy_gives_spikes() {
        let g = GridSpec::new(40, 11, 1.0, CellIndex::new(2, 5)).unwrap();
        let policy = PolicySchedule::from_fn(g, 32, |_, c| {
            let mut w = [0.0; 9];
            w[if c.row + 1 < 40 {
                Action::Forward.index()
            } else {
                Action::Stay.index()
            }] = 1.0;
            w
        })
        .unwrap();
        let occ = predict_occupancy(&policy, g.anchor(), 32, 32).unwrap();
        for t in 0..32 {
            assert_eq!(occ.get(t, CellIndex::new(3 + t, 5)), 1.0);
            assert_eq!(occ.mass(t), 1.0);
        }
    }

    #[test]
    fn uniform_first_slice_and_mass() {
        let g = GridSpec::new(71, 71, 1.0, CellIndex::new(35, 35)).unwrap();
        let r = RewardField::uniform(71, 71);
        let soft = soft_value_iteration(&r, &g, 32).unwrap();
        let occ = predict_occupancy(&soft.policy, g.anchor(), 32, 30).unwrap();
        for t in 0..30 {
            assert!((occ.mass(t) - 1.0).abs() < 1e-9);
        }
        // Same horizon and step count: the first slice is exactly D_1.
        let occ = predict_occupancy(&soft.policy, g.anchor(), 32, 32).unwrap();
        let nonzero: Vec<f64> = occ.slice(0).iter().copied().filter(|&v| v > 0.0).collect();
        assert_eq!(nonzero.len(), 9);
        assert!(nonzero.iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-12));
    }

    #[test]
    fn paced_times_follow_the_forward_spike() {
        let g = GridSpec::new(40, 11, 1.0, CellIndex::new(2, 5)).unwrap();
        let policy = PolicySchedule::from_fn(g, 32, |_, c| {
            let mut w = [0.0; 9];
            w[if c.row + 1 < 40 {
                Action::Forward.index()
            } else {
                Action::Stay.index()
            }] = 1.0;
            w
        })
        .unwrap();
        let field = crate::irl::expected_visitation(&policy, g.anchor(), 32).unwrap();
        assert_eq!(paced_times(4, 32, 0.5), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(paced_times(3, 4, 2.0), vec![2.0, 4.0, 4.0]);
        // Half a cell per timestamp: even timestamps land on cells, odd ones
        // split the mass between neighbours.
        let occ = occupancy_at_times(&field, 40, 11, &paced_times(8, 32, 0.5)).unwrap();
        assert_eq!(occ.get(0, CellIndex::new(2, 5)), 0.5);
        assert_eq!(occ.get(0, CellIndex::new(3, 5)), 0.5);
        assert_eq!(occ.get(1, CellIndex::new(3, 5)), 1.0);
        assert_eq!(occ.get(7, CellIndex::new(6, 5)), 1.0);
        // Pace H / steps reproduces the fixed mapping.
        let fixed = occupancy_from_visitation(&field, 40, 11, 16).unwrap();
        let paced = occupancy_at_times(&field, 40, 11, &paced_times(16, 32, 2.0)).unwrap();
        assert_eq!(fixed, paced);
        assert!(occupancy_at_times(&field, 40, 11, &[33.0]).is_err());
        assert!(occupancy_at_times(&field, 40, 11, &[]).is_err());
    }

    #[test]
    fn focal_examples() {
        let gt = STOccupancy {
            rows: 1,
            cols: 2,
            steps: 1,
            data: vec![1, 0],
        };
        let perfect = ProbOccupancy {
            rows: 1,
            cols: 2,
            steps: 1,
            data: vec![1.0, 0.0],
        };
        assert!(focal_bce(&perfect, &gt, 2.0, 0.25).unwrap() < 1e-5);

        let pred = ProbOccupancy {
            rows: 1,
            cols: 2,
            steps: 1,
            data: vec![0.3, 0.6],
        };
        let bce = -(libm::log(0.3) + libm::log(0.4)) / 2.0;
        assert!((focal_bce(&pred, &gt, 0.0, 0.5).unwrap() - bce / 2.0).abs() < 1e-15);

        let gt1 = STOccupancy {
            rows: 1,
            cols: 1,
            steps: 1,
            data: vec![1],
        };
        let half = ProbOccupancy::constant(1, 1, 1, 0.5);
        let v = focal_bce(&half, &gt1, 2.0, 0.25).unwrap();
        assert!((v - 0.25 * 0.25 * core::f64::consts::LN_2).abs() < 1e-15);
        assert!((v - 0.0433).abs() < 1e-4);

        assert!(focal_bce(&half, &gt, 2.0, 0.25).is_err());
    }
}
