//! Planner, visitation and IRL objective against exhaustive path
//! enumeration and finite differences.

use fim_core::eval::{enumerate_paths, PathDistribution};
use fim_core::irl::{
    expected_visitation, irl_loss_and_grad, reward_backward, reward_forward, soft_value_iteration,
    train_irl, Demonstration, IrlConfig, Optimizer, RewardField, RewardMapParams, RewardMode,
};
use fim_core::rng::Stream;
use fim_core::rollout::sample_rollouts;
use fim_core::scene::FeatureStack;
use fim_core::{CellIndex, GridSpec};

struct Instance {
    spec: GridSpec,
    start: CellIndex,
    reward: RewardField,
    horizon: usize,
}

fn instance(n: usize, horizon: usize, seed: u64) -> Instance {
    let mut rng = Stream::new(seed, 0);
    let spec = GridSpec::new(n, n, 1.0, CellIndex::new(0, 0)).unwrap();
    let start = CellIndex::new(rng.index(n), rng.index(n));
    let raw = (0..n * n).map(|_| rng.range(-1.0, 0.0)).collect();
    Instance {
        spec,
        start,
        reward: RewardField::from_raw(n, n, raw).unwrap(),
        horizon,
    }
}

/// Demonstrations drawn from the enumerated path distribution itself.
fn demos_from(
    dist: &PathDistribution,
    spec: &GridSpec,
    count: usize,
    seed: u64,
) -> Vec<Demonstration> {
    let mut rng = Stream::new(seed, 1);
    (0..count)
        .map(|_| {
            let i = rng.weighted(&dist.probabilities).unwrap();
            Demonstration::new(
                dist.paths[i].iter().map(|&f| spec.cell_at(f)).collect(),
                spec,
            )
            .unwrap()
        })
        .collect()
}

fn check_against_enumeration(inst: &Instance, seed: u64) {
    let Instance {
        spec,
        start,
        reward,
        horizon,
    } = inst;
    let dist = enumerate_paths(reward, spec, *start, *horizon).unwrap();
    let soft = soft_value_iteration(reward, spec, *horizon).unwrap();
    let visits = expected_visitation(&soft.policy, *start, *horizon).unwrap();

    assert!((soft.value(0, *start) - dist.log_partition).abs() < 1e-9);
    for (path, (acts, &p)) in dist
        .paths
        .iter()
        .zip(dist.actions.iter().zip(&dist.probabilities))
    {
        let via_policy: f64 = acts
            .iter()
            .enumerate()
            .map(|(t, &a)| soft.policy.prob(t, spec.cell_at(path[t]), a))
            .product();
        assert!(
            (via_policy - p).abs() < 1e-9,
            "path probability {via_policy} vs {p}"
        );
    }
    for t in 0..=*horizon {
        for (a, b) in visits.step(t).iter().zip(&dist.marginals[t]) {
            assert!((a - b).abs() < 1e-9, "D_{t}: {a} vs {b}");
        }
    }

    let demos = demos_from(&dist, spec, 4, seed);
    let obj = irl_loss_and_grad(reward, &demos, *start, spec, *horizon).unwrap();
    assert!((obj.nll - dist.nll(spec, &demos).unwrap()).abs() < 1e-9);
    for (a, b) in obj.grad_reward.iter().zip(dist.grad(spec, &demos).unwrap()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn small_grids_match_enumeration() {
    for seed in 0..20 {
        check_against_enumeration(&instance(5, 4, seed), seed);
    }
}

#[test]
fn seven_by_seven_matches_enumeration() {
    for seed in 100..105 {
        check_against_enumeration(&instance(7, 6, seed), seed);
    }
}

#[test]
fn seed_zero_marginals_agree_across_modules() {
    let inst = instance(5, 4, 0);
    let dist = enumerate_paths(&inst.reward, &inst.spec, inst.start, 4).unwrap();
    let soft = soft_value_iteration(&inst.reward, &inst.spec, 4).unwrap();
    let visits = expected_visitation(&soft.policy, inst.start, 4).unwrap();
    let total: f64 = dist
        .expected_counts()
        .iter()
        .zip(visits.aggregate())
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(total < 1e-9);
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn reward_gradient_matches_finite_differences() {
    const EPS: f64 = 1e-5;
    for seed in 0..5 {
        let inst = instance(7, 6, 200 + seed);
        let dist = enumerate_paths(&inst.reward, &inst.spec, inst.start, 6).unwrap();
        let demos = demos_from(&dist, &inst.spec, 3, seed);
        let raw = inst.reward.values().to_vec();
        let nll_at = |raw: &[f64]| {
            let r = RewardField::from_raw(7, 7, raw.to_vec()).unwrap();
            irl_loss_and_grad(&r, &demos, inst.start, &inst.spec, 6)
                .unwrap()
                .nll
        };
        let analytic = irl_loss_and_grad(&inst.reward, &demos, inst.start, &inst.spec, 6)
            .unwrap()
            .grad_reward;
        let mut rng = Stream::new(seed, 9);
        for _ in 0..10 {
            let cell = rng.index(49);
            let (mut up, mut down) = (raw.clone(), raw.clone());
            up[cell] += EPS;
            down[cell] -= EPS;
            let fd = (nll_at(&up) - nll_at(&down)) / (2.0 * EPS);
            assert!(
                rel_err(fd, analytic[cell]) < 1e-5,
                "cell {cell}: fd {fd} vs {}",
                analytic[cell]
            );
        }
    }
}

fn random_features(n: usize, seed: u64) -> FeatureStack {
    let mut rng = Stream::new(seed, 3);
    FeatureStack::new(
        n,
        n,
        (0..n * n * FeatureStack::CHANNELS)
            .map(|_| rng.range(-1.0, 1.0))
            .collect(),
    )
    .unwrap()
}

/// Parameters that can move the nll: everything except the final reward
/// offset (the nll is invariant to a constant reward shift) and, for the
/// two-layer map, the weights of hidden units inactive on every cell. Both
/// have an identically zero derivative.
fn live_params(params: &RewardMapParams, features: &FeatureStack) -> Vec<usize> {
    let offset = params.theta.len() - 1;
    if params.mode == RewardMode::Linear {
        return (0..offset).collect();
    }
    let (h, f) = (params.hidden, params.n_features);
    let live: Vec<bool> = (0..h)
        .map(|j| {
            (0..features.rows() * features.cols()).any(|cell| {
                let x = features.at(cell);
                let z: f64 = (0..f)
                    .map(|i| params.theta[j * f + i] * x[i] * params.input_scale[i])
                    .sum::<f64>()
                    + params.theta[h * f + j];
                z > 0.0
            })
        })
        .collect();
    (0..params.theta.len())
        .filter(|&i| {
            let unit = if i < h * f {
                Some(i / f)
            } else if i < h * f + 2 * h {
                Some((i - h * f) % h)
            } else {
                None
            };
            i != offset && unit.is_none_or(|j| live[j])
        })
        .collect()
}

fn params_gradient_matches_finite_differences(mode: RewardMode) {
    const EPS: f64 = 1e-5;
    for seed in 0..5 {
        let n = 7;
        let spec = GridSpec::new(n, n, 1.0, CellIndex::new(3, 3)).unwrap();
        let features = random_features(n, seed);
        let mut params = RewardMapParams::init(mode, FeatureStack::CHANNELS, 8, vec![1.0; 6], seed);
        let mut rng = Stream::new(seed, 4);
        params
            .theta
            .iter_mut()
            .for_each(|t| *t += rng.range(-0.5, 0.5));
        let reward = reward_forward(&features, &params).unwrap();
        let dist = enumerate_paths(&reward, &spec, spec.anchor(), 5).unwrap();
        let demos = demos_from(&dist, &spec, 3, seed);
        let nll_at = |theta: &[f64]| {
            let p = RewardMapParams {
                theta: theta.to_vec(),
                ..params.clone()
            };
            let r = reward_forward(&features, &p).unwrap();
            irl_loss_and_grad(&r, &demos, spec.anchor(), &spec, 5)
                .unwrap()
                .nll
        };
        let obj = irl_loss_and_grad(&reward, &demos, spec.anchor(), &spec, 5).unwrap();
        let analytic = reward_backward(&features, &params, &obj.grad_reward).unwrap();
        let offset = *analytic.last().unwrap();
        assert!(offset.abs() < 1e-12, "{mode:?} offset gradient {offset}");
        let live = live_params(&params, &features);
        for _ in 0..10 {
            let i = live[rng.index(live.len())];
            let (mut up, mut down) = (params.theta.clone(), params.theta.clone());
            up[i] += EPS;
            down[i] -= EPS;
            let fd = (nll_at(&up) - nll_at(&down)) / (2.0 * EPS);
            assert!(
                rel_err(fd, analytic[i]) < 1e-5,
                "{mode:?} theta[{i}]: fd {fd} vs {}",
                analytic[i]
            );
        }
    }
}

#[test]
fn linear_map_gradient_matches_finite_differences() {
    params_gradient_matches_finite_differences(RewardMode::Linear);
}

#[test]
fn two_layer_gradient_matches_finite_differences() {
    params_gradient_matches_finite_differences(RewardMode::TwoLayer);
}

#[test]
fn training_recovers_expert_visitation() {
    let (n, h) = (9, 8);
    let spec = GridSpec::new(n, n, 1.0, CellIndex::new(0, 4)).unwrap();
    let start = spec.anchor();
    // Forward progress with a lateral penalty.
    let truth = (0..n * n)
        .map(|f| {
            let c = spec.cell_at(f);
            0.8 * c.row as f64 - 0.5 * (c.col as f64 - 4.0).abs()
        })
        .collect();
    let truth = RewardField::from_raw(n, n, truth).unwrap();
    let expert = soft_value_iteration(&truth, &spec, h).unwrap();
    let grt = sample_rollouts(&expert.policy, &truth, start, 16, h, 7).unwrap();
    let demos: Vec<Demonstration> = grt
        .paths
        .iter()
        .map(|p| Demonstration::new(p.clone(), &spec).unwrap())
        .collect();

    let features = FeatureStack::one_hot(n, n);
    let init = RewardMapParams::zeros(RewardMode::Linear, n * n, 0);
    let cfg = IrlConfig {
        lr: 0.3,
        max_iters: 300,
        tol: 0.0,
        optimizer: Optimizer::SafeguardedAdam,
    };
    let (params, diag) = train_irl(&features, &spec, &demos, start, h, init, &cfg).unwrap();
    assert!(diag.nll.windows(2).all(|w| w[1] <= w[0] + 1e-6));

    let learned = reward_forward(&features, &params).unwrap();
    let obj = irl_loss_and_grad(&learned, &demos, start, &spec, h).unwrap();
    let diff: Vec<f64> = obj
        .expected
        .aggregate()
        .iter()
        .zip(&obj.expert)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let tv = 0.5 * diff.iter().sum::<f64>() / h as f64;
    assert!(tv <= 0.05, "tv {tv}");
    assert!(diff.iter().all(|&d| d <= 1e-3));
}
