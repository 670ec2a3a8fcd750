//! Exact MaxEnt path distribution by exhaustive enumeration.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Action, CellIndex, GridSpec};
use crate::irl::{Demonstration, RewardField};
use crate::{Error, Result};

/// Largest number of action sequences (`9^H`) the oracle will enumerate.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Every valid length-`H` path from `start` with probability proportional
/// to `exp(sum of entered-cell rewards)`.
#[derive(Debug, Clone)]
pub struct PathDistribution {
    pub horizon: usize,
    /// Flat cell indices, `horizon + 1` per path.
    pub paths: Vec<Vec<usize>>,
    pub actions: Vec<Vec<Action>>,
    pub probabilities: Vec<f64>,
    /// `log Z`, which equals the soft value of the start state.
    pub log_partition: f64,
    /// Per-step marginals `D_t`, `(horizon + 1) x cells`.
    pub marginals: Vec<Vec<f64>>,
    reward: Vec<f64>,
}

pub fn enumerate_paths(
    reward: &RewardField,
    spec: &GridSpec,
    start: CellIndex,
    horizon: usize,
) -> Result<PathDistribution> {
    let within = 9u64
        .checked_pow(horizon as u32)
        .is_some_and(|n| n <= ENUMERATION_LIMIT);
    if !within {
        return Err(Error::GuardExceeded { horizon });
    }
    if reward.rows() != spec.rows() || reward.cols() != spec.cols() {
        return Err(Error::Shape("reward field does not match the grid".into()));
    }
    if start.row >= spec.rows() || start.col >= spec.cols() {
        return Err(Error::OutOfBounds {
            row: start.row as i64,
            col: start.col as i64,
        });
    }
    let r = reward.values().to_vec();

    let mut paths = Vec::new();
    let mut actions = Vec::new();
    let mut log_w = Vec::new();
    let mut cells = vec![start];
    let mut acts = Vec::new();
    fn walk(
        spec: &GridSpec,
        r: &[f64],
        horizon: usize,
        cells: &mut Vec<CellIndex>,
        acts: &mut Vec<Action>,
        total: f64,
        out: &mut (&mut Vec<Vec<usize>>, &mut Vec<Vec<Action>>, &mut Vec<f64>),
    ) {
        if acts.len() == horizon {
            out.0.push(cells.iter().map(|&c| spec.flat(c)).collect());
            out.1.push(acts.clone());
            out.2.push(total);
            return;
        }
        let here = *cells.last().unwrap();
        for a in Action::ALL {
            if let Some(next) = spec.step(here, a) {
                cells.push(next);
                acts.push(a);
                walk(
                    spec,
                    r,
                    horizon,
                    cells,
                    acts,
                    total + r[spec.flat(next)],
                    out,
                );
                cells.pop();
                acts.pop();
            }
        }
    }
    walk(
        spec,
        &r,
        horizon,
        &mut cells,
        &mut acts,
        0.0,
        &mut (&mut paths, &mut actions, &mut log_w),
    );

    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|w| libm::exp(w - max)).sum();
    let log_partition = max + libm::log(z);
    let probabilities: Vec<f64> = log_w.iter().map(|w| libm::exp(w - log_partition)).collect();
    let mut marginals = vec![vec![0.0; spec.len()]; horizon + 1];
    for (path, &p) in paths.iter().zip(&probabilities) {
        for (t, &c) in path.iter().enumerate() {
            marginals[t][c] += p;
        }
    }
    Ok(PathDistribution {
        horizon,
        paths,
        actions,
        probabilities,
        log_partition,
        marginals,
        reward: r,
    })
}

impl PathDistribution {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `E[mu]`: marginals summed over steps `1..=H`.
    pub fn expected_counts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.marginals[0].len()];
        for d in &self.marginals[1..] {
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    fn demo_reward(&self, spec: &GridSpec, demo: &Demonstration) -> f64 {
        demo.states()[1..=self.horizon]
            .iter()
            .map(|&c| self.reward[spec.flat(c)])
            .sum()
    }

    /// Mean `-log P(demo)` over the demonstrations.
    pub fn nll(&self, spec: &GridSpec, demos: &[Demonstration]) -> Result<f64> {
        if demos.is_empty() {
            return Err(Error::Empty("demonstration set"));
        }
        if demos.iter().any(|d| d.len() < self.horizon + 1) {
            return Err(Error::Shape(
                "demonstration shorter than the horizon".into(),
            ));
        }
        let mean =
            demos.iter().map(|d| self.demo_reward(spec, d)).sum::<f64>() / demos.len() as f64;
        Ok(self.log_partition - mean)
    }

    /// Gradient of [`nll`](Self::nll) with respect to each cell's reward.
    pub fn grad(&self, spec: &GridSpec, demos: &[Demonstration]) -> Result<Vec<f64>> {
        if demos.is_empty() {
            return Err(Error::Empty("demonstration set"));
        }
        let mut g = self.expected_counts();
        let w = 1.0 / demos.len() as f64;
        for d in demos {
            for &c in &d.states()[1..=self.horizon] {
                g[spec.flat(c)] -= w;
            }
        }
        Ok(g)
    }
}
