//! Reward-map training loop.

use alloc::vec;
use alloc::vec::Vec;

use super::objective::{irl_loss_and_grad, Demonstration};
use super::reward::{reward_backward, reward_forward, RewardMapParams};
use crate::grid::{CellIndex, GridSpec};
use crate::scene::FeatureStack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    /// Adam, falling back to backtracking gradient descent whenever a step
    /// would raise the nll, so the recorded nll never increases.
    SafeguardedAdam,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlConfig {
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once `|nll_k - nll_{k-1}| < tol`. The first iteration compares
    /// against zero, so `tol = inf` performs exactly one update.
    pub tol: f64,
    pub optimizer: Optimizer,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            lr: 0.05,
            max_iters: 200,
            tol: 1e-6,
            optimizer: Optimizer::Adam,
        }
    }
}

/// One scene's training data: features over the planning grid, the start
/// cell and its demonstrations.
#[derive(Debug, Clone)]
pub struct IrlProblem {
    pub features: FeatureStack,
    pub spec: GridSpec,
    pub start: CellIndex,
    pub horizon: usize,
    pub demos: Vec<Demonstration>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainDiagnostics {
    /// Mean nll at the parameters used for each update.
    pub nll: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub converged: bool,
}

impl TrainDiagnostics {
    pub fn iterations(&self) -> usize {
        self.nll.len()
    }
}

/// nll and parameter gradient of one problem.
pub fn problem_loss_and_grad(
    problem: &IrlProblem,
    params: &RewardMapParams,
) -> Result<(f64, Vec<f64>)> {
    let reward = reward_forward(&problem.features, params)?;
    let obj = irl_loss_and_grad(
        &reward,
        &problem.demos,
        problem.start,
        &problem.spec,
        problem.horizon,
    )?;
    let grad = reward_backward(&problem.features, params, &obj.grad_reward)?;
    Ok((obj.nll, grad))
}

/// Sequential evaluation of every problem, in order.
pub fn evaluate_sequential(
    problems: &[IrlProblem],
    params: &RewardMapParams,
) -> Result<Vec<(f64, Vec<f64>)>> {
    problems
        .iter()
        .map(|p| problem_loss_and_grad(p, params))
        .collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for i in 0..theta.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= lr * m_hat / (libm::sqrt(v_hat) + Self::EPS);
        }
    }
}

/// Trains a shared reward map over several problems. `evaluate` returns
/// per-problem `(nll, grad)` in problem order; the mean is reduced here in
/// that order, so parallel evaluators stay deterministic.
pub fn train_irl_with<E>(
    problems: &[IrlProblem],
    init: RewardMapParams,
    config: &IrlConfig,
    mut evaluate: E,
) -> Result<(RewardMapParams, TrainDiagnostics)>
where
    E: FnMut(&[IrlProblem], &RewardMapParams) -> Result<Vec<(f64, Vec<f64>)>>,
{
    if problems.is_empty() || problems.iter().any(|p| p.demos.is_empty()) {
        return Err(Error::Empty("demonstration set"));
    }
    let scale = 1.0 / problems.len() as f64;
    let mut mean = |params: &RewardMapParams| -> Result<(f64, Vec<f64>)> {
        let results = evaluate(problems, params)?;
        let mut nll = 0.0;
        let mut grad = vec![0.0; params.theta.len()];
        for (l, g) in &results {
            nll += l * scale;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi * scale;
            }
        }
        Ok((nll, grad))
    };
    let finite = |nll: f64, grad: &[f64]| nll.is_finite() && grad.iter().all(|g| g.is_finite());

    let mut params = init;
    let mut diag = TrainDiagnostics::default();
    let mut adam = Adam::new(params.theta.len());
    let mut prev = 0.0;
    let (mut nll, mut grad) = mean(&params)?;
    for iteration in 1..=config.max_iters {
        if !finite(nll, &grad) {
            return Err(Error::Diverged { iteration });
        }
        diag.nll.push(nll);
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        diag.grad_norm.push(libm::sqrt(grad_sq));

        let mut next = params.clone();
        match config.optimizer {
            Optimizer::Adam | Optimizer::SafeguardedAdam => {
                adam.step(&mut next.theta, &grad, config.lr)
            }
            Optimizer::GradientDescent => descend(&mut next.theta, &grad, config.lr),
        }
        if !next.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        let done = iteration == config.max_iters;
        let (mut next_nll, mut next_grad) = if done {
            (nll, grad.clone())
        } else {
            mean(&next)?
        };
        if config.optimizer == Optimizer::SafeguardedAdam && !done && !(next_nll <= nll) {
            // Backtracking gradient descent from the current parameters
            // (Armijo condition); stay put if no step length helps.
            let mut step = config.lr;
            let mut accepted = false;
            for _ in 0..BACKTRACK_LIMIT {
                let mut trial = params.clone();
                descend(&mut trial.theta, &grad, step);
                let (l, g) = mean(&trial)?;
                if l <= nll - ARMIJO * step * grad_sq && finite(l, &g) {
                    (next, next_nll, next_grad) = (trial, l, g);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                (next, next_nll, next_grad) = (params.clone(), nll, grad.clone());
            }
        }
        params = next;

        let delta = (nll - prev).abs();
        prev = nll;
        (nll, grad) = (next_nll, next_grad);
        if delta < config.tol || config.tol == f64::INFINITY {
            diag.converged = true;
            break;
        }
    }
    Ok((params, diag))
}

const BACKTRACK_LIMIT: usize = 40;
const ARMIJO: f64 = 1e-4;

fn descend(theta: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in theta.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

/// Single-scene training.
pub fn train_irl(
    features: &FeatureStack,
    spec: &GridSpec,
    demos: &[Demonstration],
    start: CellIndex,
    horizon: usize,
    init: RewardMapParams,
    config: &IrlConfig,
) -> Result<(RewardMapParams, TrainDiagnostics)> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstration set"));
    }
    let problem = IrlProblem {
        features: features.clone(),
        spec: *spec,
        start,
        horizon,
        demos: demos.to_vec(),
    };
    train_irl_with(
        core::slice::from_ref(&problem),
        init,
        config,
        evaluate_sequential,
    )
}
