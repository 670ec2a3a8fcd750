//! Demonstrations and the MaxEnt negative log-likelihood.

use alloc::vec;
use alloc::vec::Vec;

use super::planning::{expected_visitation, soft_value_iteration, VisitationField};
use super::RewardField;
use crate::grid::{CellIndex, GridSpec};
use crate::{Error, Result};

/// An expert state sequence: pairwise adjacent (or equal) in-bounds cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    states: Vec<CellIndex>,
}

impl Demonstration {
    pub fn new(states: Vec<CellIndex>, spec: &GridSpec) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("demonstration"));
        }
        if let Some(c) = states
            .iter()
            .find(|c| c.row >= spec.rows() || c.col >= spec.cols())
        {
            return Err(Error::OutOfBounds {
                row: c.row as i64,
                col: c.col as i64,
            });
        }
        if states.windows(2).any(|w| w[0].chebyshev(w[1]) > 1) {
            return Err(Error::InvalidArgument(
                "demonstration cells must be adjacent".into(),
            ));
        }
        Ok(Demonstration { states })
    }

    /// Fits a quantized path to `horizon + 1` states: longer paths are cut,
    /// shorter ones hold their last cell (the expert stays put).
    pub fn from_path(path: &[CellIndex], horizon: usize, spec: &GridSpec) -> Result<Self> {
        let last = *path.last().ok_or(Error::Empty("demonstration"))?;
        let mut states: Vec<CellIndex> = path.iter().copied().take(horizon + 1).collect();
        states.resize(horizon + 1, last);
        Demonstration::new(states, spec)
    }

    pub fn states(&self) -> &[CellIndex] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn check_demos(demos: &[Demonstration], horizon: usize, start: Option<CellIndex>) -> Result<()> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstration set"));
    }
    for (index, d) in demos.iter().enumerate() {
        if d.len() < horizon + 1 {
            return Err(Error::DemoTooShort {
                index,
                len: d.len(),
                needed: horizon + 1,
            });
        }
        if start.is_some_and(|s| d.states[0] != s) {
            return Err(Error::DemoStart { index });
        }
    }
    Ok(())
}

/// Empirical per-step state distributions of the demonstrations; the
/// aggregate is the expert visit count `mu_hat` over steps `1..=H`.
/// Longer demonstrations are truncated.
pub fn expert_visitation(
    demos: &[Demonstration],
    spec: &GridSpec,
    horizon: usize,
) -> Result<VisitationField> {
    check_demos(demos, horizon, None)?;
    let cells = spec.len();
    let weight = 1.0 / demos.len() as f64;
    let mut per_step = vec![0.0; (horizon + 1) * cells];
    for d in demos {
        for (t, &cell) in d.states.iter().take(horizon + 1).enumerate() {
            per_step[t * cells + spec.flat(cell)] += weight;
        }
    }
    Ok(VisitationField::from_parts(cells, horizon, per_step))
}

#[derive(Debug, Clone)]
pub struct IrlObjective {
    pub nll: f64,
    /// `E[mu] - mu_hat`, the gradient of `nll` with respect to each cell's reward.
    pub grad_reward: Vec<f64>,
    pub expected: VisitationField,
    pub expert: Vec<f64>,
}

/// Mean negative log-likelihood of the demonstrations under the MaxEnt path
/// distribution, and its gradient with respect to the reward field.
pub fn irl_loss_and_grad(
    reward: &RewardField,
    demos: &[Demonstration],
    start: CellIndex,
    spec: &GridSpec,
    horizon: usize,
) -> Result<IrlObjective> {
    check_demos(demos, horizon, Some(start))?;
    let soft = soft_value_iteration(reward, spec, horizon)?;
    let expected = expected_visitation(&soft.policy, start, horizon)?;
    let expert = expert_visitation(demos, spec, horizon)?.aggregate();
    let r = reward.values();
    let mean_path_reward = demos
        .iter()
        .map(|d| {
            d.states[1..=horizon]
                .iter()
                .map(|&c| r[spec.flat(c)])
                .sum::<f64>()
        })
        .sum::<f64>()
        / demos.len() as f64;
    let nll = soft.value(0, start) - mean_path_reward;
    let grad_reward = expected
        .aggregate()
        .iter()
        .zip(&expert)
        .map(|(e, m)| e - m)
        .collect();
    Ok(IrlObjective {
        nll,
        grad_reward,
        expected,
        expert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Action;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, CellIndex::new(n / 2, n / 2)).unwrap()
    }

    fn walk(g: &GridSpec, actions: &[Action]) -> Vec<CellIndex> {
        let mut cells = vec![g.anchor()];
        for &a in actions {
            let next = g.step(*cells.last().unwrap(), a).unwrap();
            cells.push(next);
        }
        cells
    }

    #[test]
    fn straight_demo_counts_once_per_cell() {
        let g = spec(11);
        let d = Demonstration::new(walk(&g, &[Action::Forward; 4]), &g).unwrap();
        let mu = expert_visitation(&[d.clone()], &g, 4).unwrap().aggregate();
        for (flat, &m) in mu.iter().enumerate() {
            let visited = d.states()[1..].contains(&g.cell_at(flat));
            assert_eq!(m, if visited { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn staying_demo_accumulates_horizon() {
        let g = spec(7);
        let d = Demonstration::new(vec![g.anchor(); 6], &g).unwrap();
        let mu = expert_visitation(&[d], &g, 5).unwrap().aggregate();
        assert_eq!(mu[g.flat(g.anchor())], 5.0);
        assert_eq!(mu.iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn diverging_demos_average() {
        let g = spec(11);
        let a = Demonstration::new(
            walk(
                &g,
                &[Action::Forward, Action::Forward, Action::Left, Action::Left],
            ),
            &g,
        )
        .unwrap();
        let b = Demonstration::new(
            walk(
                &g,
                &[
                    Action::Forward,
                    Action::Forward,
                    Action::Right,
                    Action::Right,
                ],
            ),
            &g,
        )
        .unwrap();
        let mu = expert_visitation(&[a.clone(), b.clone()], &g, 4)
            .unwrap()
            .aggregate();
        for &c in &a.states()[1..3] {
            assert_eq!(mu[g.flat(c)], 1.0);
        }
        for &c in a.states()[3..].iter().chain(&b.states()[3..]) {
            assert_eq!(mu[g.flat(c)], 0.5);
        }
    }

    #[test]
    fn short_demo_and_empty_set_rejected() {
        let g = spec(7);
        let d = Demonstration::new(vec![g.anchor(); 3], &g).unwrap();
        assert!(matches!(
            expert_visitation(&[d], &g, 4),
            Err(Error::DemoTooShort { .. })
        ));
        assert!(matches!(
            irl_loss_and_grad(&RewardField::uniform(7, 7), &[], g.anchor(), &g, 2),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn non_adjacent_demo_rejected() {
        let g = spec(7);
        assert!(Demonstration::new(vec![CellIndex::new(0, 0), CellIndex::new(2, 0)], &g).is_err());
    }

    #[test]
    fn from_path_pads_and_truncates() {
        let g = spec(9);
        let path = walk(&g, &[Action::Forward; 3]);
        let padded = Demonstration::from_path(&path, 6, &g).unwrap();
        assert_eq!(padded.len(), 7);
        assert_eq!(padded.states()[6], path[3]);
        let cut = Demonstration::from_path(&path, 2, &g).unwrap();
        assert_eq!(cut.states(), &path[..3]);
    }

    #[test]
    fn uniform_reward_nll_is_horizon_log9() {
        let g = spec(15);
        let h = 4;
        let d = Demonstration::new(
            walk(
                &g,
                &[
                    Action::Forward,
                    Action::Left,
                    Action::Stay,
                    Action::BackLeft,
                ],
            ),
            &g,
        )
        .unwrap();
        let obj =
            irl_loss_and_grad(&RewardField::uniform(15, 15), &[d], g.anchor(), &g, h).unwrap();
        assert!((obj.nll - h as f64 * libm::log(9.0)).abs() < 1e-12);
        assert!(obj.grad_reward.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn nll_falls_as_reward_sharpens_on_the_demo() {
        let g = spec(9);
        let h = 4;
        let path = walk(&g, &[Action::Forward; 4]);
        let d = Demonstration::new(path.clone(), &g).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let scale = 0.5 * k as f64;
            let raw: Vec<f64> = (0..g.len())
                .map(|f| {
                    if path[1..].contains(&g.cell_at(f)) {
                        0.0
                    } else {
                        -scale
                    }
                })
                .collect();
            let r = RewardField::from_raw(9, 9, raw).unwrap();
            let nll = irl_loss_and_grad(&r, &[d.clone()], g.anchor(), &g, h)
                .unwrap()
                .nll;
            assert!(nll < prev, "scale {scale}: {nll} !< {prev}");
            prev = nll;
        }
    }

    #[test]
    fn demo_must_start_at_start() {
        let g = spec(9);
        let d = Demonstration::new(vec![CellIndex::new(0, 0); 3], &g).unwrap();
        assert!(matches!(
            irl_loss_and_grad(&RewardField::uniform(9, 9), &[d], g.anchor(), &g, 2),
            Err(Error::DemoStart { index: 0 })
        ));
    }
}
