//! Finite-horizon soft value iteration and the visitation forward pass.
//!
//! Reward is collected on entered states and the terminal value is zero, so
//! the policy induces `P(path | s0) ∝ exp(sum_{t=1..H} R(s_t))` over all
//! valid length-`H` action sequences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::RewardField;
use crate::grid::{Action, CellIndex, GridSpec};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Time-indexed stochastic policy `pi_t(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySchedule {
    spec: GridSpec,
    horizon: usize,
    /// `horizon x cells x 9`.
    probs: Vec<f64>,
    next: Vec<usize>,
}

impl PolicySchedule {
    /// Builds a schedule from explicit per-step action weights (normalized
    /// over valid actions). Used for hand-made policies and baselines.
    pub fn from_fn(
        spec: GridSpec,
        horizon: usize,
        mut weights: impl FnMut(usize, CellIndex) -> [f64; 9],
    ) -> Result<Self> {
        let next = spec.transition_table();
        let cells = spec.len();
        let mut probs = vec![0.0; horizon * cells * Action::COUNT];
        for t in 0..horizon {
            for flat in 0..cells {
                let w = weights(t, spec.cell_at(flat));
                let row = &mut probs[(t * cells + flat) * Action::COUNT..][..Action::COUNT];
                let mut total = 0.0;
                for a in 0..Action::COUNT {
                    if next[flat * Action::COUNT + a] != NONE {
                        row[a] = w[a].max(0.0);
                        total += row[a];
                    }
                }
                if !(total > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "no positive valid action at t={t}, cell {flat}"
                    )));
                }
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
        Ok(PolicySchedule {
            spec,
            horizon,
            probs,
            next,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Action probabilities at step `t` for the cell with flat index `flat`.
    pub fn row(&self, t: usize, flat: usize) -> &[f64] {
        let cells = self.spec.len();
        &self.probs[(t * cells + flat) * Action::COUNT..][..Action::COUNT]
    }

    pub fn prob(&self, t: usize, cell: CellIndex, action: Action) -> f64 {
        self.row(t, self.spec.flat(cell))[action.index()]
    }

    /// Flat successor of `flat` under action index `a`, `None` when masked.
    pub fn successor(&self, flat: usize, a: usize) -> Option<usize> {
        let n = self.next[flat * Action::COUNT + a];
        (n != NONE).then_some(n)
    }

    pub fn is_valid(&self, flat: usize, a: usize) -> bool {
        self.next[flat * Action::COUNT + a] != NONE
    }
}

/// Output of soft value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftValues {
    /// `(horizon + 1) x cells`; the last slice is zero.
    values: Vec<f64>,
    pub policy: PolicySchedule,
    pub reward: RewardField,
}

impl SoftValues {
    pub fn horizon(&self) -> usize {
        self.policy.horizon
    }

    pub fn value(&self, t: usize, cell: CellIndex) -> f64 {
        self.values[t * self.policy.spec.len() + self.policy.spec.flat(cell)]
    }

    /// `V_t` as a flat field.
    pub fn values_at(&self, t: usize) -> &[f64] {
        let n = self.policy.spec.len();
        &self.values[t * n..(t + 1) * n]
    }

    /// `Q_t(s, a) = R(s') + V_{t+1}(s')`, `None` for masked actions.
    pub fn q_value(&self, t: usize, cell: CellIndex, action: Action) -> Option<f64> {
        let spec = &self.policy.spec;
        let next = self.policy.successor(spec.flat(cell), action.index())?;
        Some(self.reward.values()[next] + self.values[(t + 1) * spec.len() + next])
    }
}

pub fn soft_value_iteration(
    reward: &RewardField,
    spec: &GridSpec,
    horizon: usize,
) -> Result<SoftValues> {
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "planning horizon must be at least 1".into(),
        ));
    }
    if reward.rows() != spec.rows() || reward.cols() != spec.cols() {
        return Err(Error::Shape(format!(
            "reward is {}x{}, grid is {}x{}",
            reward.rows(),
            reward.cols(),
            spec.rows(),
            spec.cols()
        )));
    }
    let cells = spec.len();
    let next = spec.transition_table();
    let r = reward.values();
    let mut values = vec![0.0; (horizon + 1) * cells];
    let mut probs = vec![0.0; horizon * cells * Action::COUNT];
    let mut q = [0.0f64; Action::COUNT];

    for t in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((t + 1) * cells);
        let v_next = &tail[..cells];
        let v_now = &mut head[t * cells..];
        for flat in 0..cells {
            let succ = &next[flat * Action::COUNT..][..Action::COUNT];
            let mut max = f64::NEG_INFINITY;
            for a in 0..Action::COUNT {
                q[a] = if succ[a] == NONE {
                    f64::NEG_INFINITY
                } else {
                    r[succ[a]] + v_next[succ[a]]
                };
                max = max.max(q[a]);
            }
            // pi = exp(Q - V) = exp(Q - max) / sum.
            let row = &mut probs[(t * cells + flat) * Action::COUNT..][..Action::COUNT];
            let mut sum = 0.0;
            for a in 0..Action::COUNT {
                row[a] = if succ[a] == NONE {
                    0.0
                } else {
                    libm::exp(q[a] - max)
                };
                sum += row[a];
            }
            v_now[flat] = max + libm::log(sum);
            let inv = 1.0 / sum;
            row.iter_mut().for_each(|p| *p *= inv);
        }
    }

    Ok(SoftValues {
        values,
        policy: PolicySchedule {
            spec: *spec,
            horizon,
            probs,
            next,
        },
        reward: reward.clone(),
    })
}

/// Per-step state distributions `D_0..D_H` from a fixed start.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationField {
    cells: usize,
    horizon: usize,
    /// `(horizon + 1) x cells`.
    per_step: Vec<f64>,
}

impl VisitationField {
    pub(crate) fn from_parts(cells: usize, horizon: usize, per_step: Vec<f64>) -> Self {
        debug_assert_eq!(per_step.len(), (horizon + 1) * cells);
        VisitationField {
            cells,
            horizon,
            per_step,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.per_step[t * self.cells..(t + 1) * self.cells]
    }

    /// Expected visit counts over steps `1..=H`; the start state is excluded.
    pub fn aggregate(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.cells];
        for t in 1..=self.horizon {
            for (m, d) in mu.iter_mut().zip(self.step(t)) {
                *m += d;
            }
        }
        mu
    }
}

pub fn expected_visitation(
    policy: &PolicySchedule,
    start: CellIndex,
    horizon: usize,
) -> Result<VisitationField> {
    let spec = &policy.spec;
    if start.row >= spec.rows() || start.col >= spec.cols() {
        return Err(Error::OutOfBounds {
            row: start.row as i64,
            col: start.col as i64,
        });
    }
    if horizon > policy.horizon {
        return Err(Error::InvalidArgument(format!(
            "visitation horizon {horizon} exceeds policy horizon {}",
            policy.horizon
        )));
    }
    let cells = spec.len();
    let mut per_step = vec![0.0; (horizon + 1) * cells];
    per_step[spec.flat(start)] = 1.0;
    for t in 0..horizon {
        let (head, tail) = per_step.split_at_mut((t + 1) * cells);
        let now = &head[t * cells..];
        let next = &mut tail[..cells];
        for (flat, &mass) in now.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = policy.row(t, flat);
            for (a, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    next[policy.next[flat * Action::COUNT + a]] += mass * p;
                }
            }
        }
    }
    Ok(VisitationField {
        cells,
        horizon,
        per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, CellIndex::new(n / 2, n / 2)).unwrap()
    }

    #[test]
    fn uniform_reward_interior_is_uniform() {
        let g = spec(21);
        let h = 5;
        let sv = soft_value_iteration(&RewardField::uniform(21, 21), &g, h).unwrap();
        let c = g.anchor();
        for t in 0..h {
            for a in Action::ALL {
                assert!((sv.policy.prob(t, c, a) - 1.0 / 9.0).abs() < 1e-14);
            }
            let expect = (h - t) as f64 * libm::log(9.0);
            assert!((sv.value(t, c) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_prefers_rewarding_neighbor() {
        let g = spec(5);
        let mut raw = vec![-3.0; 25];
        let target = g.step(g.anchor(), Action::ForwardRight).unwrap();
        raw[g.flat(target)] = 0.0;
        let r = RewardField::from_raw(5, 5, raw).unwrap();
        let sv = soft_value_iteration(&r, &g, 1).unwrap();
        let row = sv.policy.row(0, g.flat(g.anchor()));
        let best = (0..9).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(Action::from_index(best), Some(Action::ForwardRight));
        let q = sv.q_value(0, g.anchor(), Action::ForwardRight).unwrap();
        assert!((libm::exp(q - sv.value(0, g.anchor())) - row[best]).abs() < 1e-14);
    }

    #[test]
    fn deterministic_policy_gives_spikes() {
        let g = spec(11);
        let p = PolicySchedule::from_fn(g, 4, |_, c| {
            let mut w = [0.0; 9];
            let a = if c.row + 1 < 11 {
                Action::Forward
            } else {
                Action::Stay
            };
            w[a.index()] = 1.0;
            w
        })
        .unwrap();
        let d = expected_visitation(&p, g.anchor(), 4).unwrap();
        for t in 0..=4 {
            let step = d.step(t);
            assert_eq!(step.iter().filter(|&&m| m != 0.0).count(), 1);
            assert_eq!(step[g.flat(CellIndex::new(5 + t, 5))], 1.0);
        }
    }

    #[test]
    fn uniform_first_step_spreads_over_nine_cells() {
        let g = spec(9);
        let sv = soft_value_iteration(&RewardField::uniform(9, 9), &g, 3).unwrap();
        let d = expected_visitation(&sv.policy, g.anchor(), 3).unwrap();
        let step = d.step(1);
        for a in Action::ALL {
            let c = g.step(g.anchor(), a).unwrap();
            assert!((step[g.flat(c)] - 1.0 / 9.0).abs() < 1e-12);
        }
        assert_eq!(step.iter().filter(|&&m| m > 0.0).count(), 9);
    }

    #[test]
    fn corner_masks_off_grid_actions() {
        let g = spec(5);
        let sv = soft_value_iteration(&RewardField::uniform(5, 5), &g, 1).unwrap();
        let row = sv.policy.row(0, g.flat(CellIndex::new(0, 0)));
        assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 4);
        for &p in row.iter().filter(|&&p| p > 0.0) {
            assert!((p - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_and_horizon_errors() {
        let g = spec(5);
        assert!(soft_value_iteration(&RewardField::uniform(5, 5), &g, 0).is_err());
        assert!(soft_value_iteration(&RewardField::uniform(4, 5), &g, 2).is_err());
        let sv = soft_value_iteration(&RewardField::uniform(5, 5), &g, 2).unwrap();
        assert!(expected_visitation(&sv.policy, CellIndex::new(5, 0), 2).is_err());
        assert!(expected_visitation(&sv.policy, g.anchor(), 3).is_err());
    }

    #[test]
    fn policy_is_shift_invariant() {
        let g = spec(7);
        let raw: Vec<f64> = (0..49).map(|i| libm::sin(i as f64)).collect();
        let field = RewardField::from_raw(7, 7, raw).unwrap();
        let a = soft_value_iteration(&field, &g, 4).unwrap();
        let b = soft_value_iteration(&field.offset(123.0), &g, 4).unwrap();
        for t in 0..4 {
            for flat in 0..49 {
                for (x, y) in a.policy.row(t, flat).iter().zip(b.policy.row(t, flat)) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
