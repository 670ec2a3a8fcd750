//! End-to-end forecasting for one scene.

use alloc::vec;
use alloc::vec::Vec;

use crate::decode::{cluster_proposals, refine, score_modes, Forecast};
use crate::grid::{CellIndex, GridSpec, Window};
use crate::irl::{
    expected_visitation, reward_forward, soft_value_iteration, Demonstration, IrlConfig,
    IrlProblem, PolicySchedule, RewardField, RewardMapParams, RewardMode,
};
use crate::occupancy::{occupancy_at_times, paced_times, ProbOccupancy};
use crate::rollout::{grt_to_trajectory, sample_rollouts, GRTSet, KinematicSampler};
use crate::scene::{
    generate_scene, rasterize_features, FeatureStack, RasterConfig, ScenarioKind, SceneContext,
};
use crate::{Error, Result};

/// Per-channel feature scaling applied before the reward map.
pub const DEFAULT_INPUT_SCALE: [f64; FeatureStack::CHANNELS] = [1.0, 0.2, 1.0, 1.0, 0.05, 0.05];

/// Training scenes use seeds from this offset upward, far from the seeds
/// used for evaluation scenes.
pub const TRAIN_SEED_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub grid: GridSpec,
    /// Planning horizon in grid steps.
    pub horizon: usize,
    pub rollouts: usize,
    pub modes: usize,
    pub temperature: f64,
    pub smoothing: f64,
    pub raster: RasterConfig,
    pub reward_mode: RewardMode,
    pub hidden: usize,
    pub irl: IrlConfig,
    /// Demonstration length as a multiple of the forecast horizon.
    pub demo_horizon_factor: f64,
    pub train_scenes_per_kind: usize,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            grid: GridSpec::new(128, 128, 1.0, CellIndex::new(32, 64))
                .expect("default grid is valid"),
            horizon: 32,
            rollouts: 128,
            modes: 6,
            temperature: 1.0,
            smoothing: 4.0,
            raster: RasterConfig::default(),
            reward_mode: RewardMode::TwoLayer,
            hidden: 16,
            irl: IrlConfig {
                max_iters: 150,
                ..IrlConfig::default()
            },
            demo_horizon_factor: 1.0,
            train_scenes_per_kind: 6,
            seed: 0,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.modes == 0 || self.rollouts < self.modes {
            return Err(Error::InvalidArgument("need rollouts >= modes >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidArgument(
                "temperature must be positive".into(),
            ));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidArgument(
                "smoothing weight must be finite and non-negative".into(),
            ));
        }
        if ![1.0, 1.5, 2.0].contains(&self.demo_horizon_factor) {
            return Err(Error::InvalidArgument(
                "demo horizon factor must be 1.0, 1.5 or 2.0".into(),
            ));
        }
        if !(self.irl.lr > 0.0) || self.irl.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "IRL needs a positive learning rate and iteration budget".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_params(&self) -> RewardMapParams {
        RewardMapParams::init(
            self.reward_mode,
            FeatureStack::CHANNELS,
            self.hidden,
            DEFAULT_INPUT_SCALE.to_vec(),
            self.seed,
        )
    }
}

/// A scene in the target frame with its planning window and features.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scene: SceneContext,
    pub window: Window,
    pub features: FeatureStack,
}

impl PreparedScene {
    pub fn start(&self) -> CellIndex {
        self.window.spec.anchor()
    }
}

pub fn prepare_scene(scene: &SceneContext, cfg: &ForecastConfig) -> Result<PreparedScene> {
    scene.validate()?;
    let scene = scene.normalize_to_target()?;
    let window = cfg.grid.planning_window(cfg.grid.anchor(), cfg.horizon)?;
    let features = rasterize_features(&scene, &window.spec, &cfg.raster)?;
    if !features.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    Ok(PreparedScene {
        scene,
        window,
        features,
    })
}

/// The expert demonstration of a prepared scene: current position plus
/// `factor * T_f` future points, quantized on the planning window.
pub fn scene_demonstration(
    prepared: &PreparedScene,
    horizon: usize,
    factor: f64,
) -> Result<Demonstration> {
    let steps = libm::round(factor * prepared.scene.future_len() as f64) as usize;
    let points = prepared.scene.demo_points(steps)?;
    let q = prepared.window.spec.quantize_trajectory(&points)?;
    Demonstration::from_path(&q.path, horizon, &prepared.window.spec)
}

pub fn irl_problem(scene: &SceneContext, cfg: &ForecastConfig) -> Result<IrlProblem> {
    let prepared = prepare_scene(scene, cfg)?;
    let demo = scene_demonstration(&prepared, cfg.horizon, cfg.demo_horizon_factor)?;
    Ok(IrlProblem {
        start: prepared.start(),
        spec: prepared.window.spec,
        features: prepared.features,
        horizon: cfg.horizon,
        demos: vec![demo],
    })
}

/// Synthetic training scenes, `per_kind` of each kind, with seeds disjoint
/// from evaluation seeds.
pub fn training_scenes(per_kind: usize, seed: u64) -> Vec<SceneContext> {
    let mut out = Vec::with_capacity(per_kind * ScenarioKind::ALL.len());
    for i in 0..per_kind {
        for kind in ScenarioKind::ALL {
            out.push(generate_scene(
                kind,
                TRAIN_SEED_OFFSET + seed.wrapping_mul(1 << 20) + i as u64,
            ));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ForecastOutput {
    pub forecast: Forecast,
    pub prepared: PreparedScene,
    /// Reward on the planning window.
    pub reward: RewardField,
    pub policy: PolicySchedule,
    pub rollouts: GRTSet,
}

impl ForecastOutput {
    /// Visitation-based target occupancy on the full grid. Timestamp `j`
    /// reads the visitation at the planning step the target reaches at its
    /// current speed, the same pacing the decoded trajectories use.
    pub fn occupancy(&self, grid: &GridSpec, horizon: usize) -> Result<ProbOccupancy> {
        let scene = &self.prepared.scene;
        let field = expected_visitation(&self.policy, self.prepared.start(), horizon)?;
        let pace = scene.current_speed() * scene.dt / self.prepared.window.spec.resolution();
        let times = paced_times(scene.future_len(), horizon, pace);
        let spec = self.policy.spec();
        let local = occupancy_at_times(&field, spec.rows(), spec.cols(), &times)?;
        let window = self.prepared.window;
        local.map_slices(grid.rows(), grid.cols(), |s| window.embed(grid, s))
    }

    /// Reward embedded in the full grid; cells outside the window get the
    /// window minimum.
    pub fn full_reward(&self, grid: &GridSpec) -> Vec<f64> {
        let window = self.prepared.window;
        let min = self
            .reward
            .values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut out = vec![min; grid.len()];
        for (flat, &v) in self.reward.values().iter().enumerate() {
            let cell = window.to_global(window.spec.cell_at(flat));
            out[grid.flat(cell)] = v;
        }
        out
    }
}

fn decode(
    proposals: Vec<Vec<crate::Point>>,
    path_reward: &[f64],
    tau: f64,
    cfg: &ForecastConfig,
) -> Result<Forecast> {
    let clusters = cluster_proposals(&proposals, cfg.modes, cfg.seed)?;
    let offsets = refine(&clusters.anchors, cfg.smoothing)?;
    let probs = score_modes(&clusters.membership, path_reward, cfg.modes, tau)?;
    Forecast::assemble(
        proposals,
        clusters.membership,
        clusters.anchors,
        offsets,
        probs,
    )
}

/// Full pipeline with a trained reward map: reward, planning, rollouts,
/// proposals, clustering, refinement and scoring.
pub fn forecast_scene(
    scene: &SceneContext,
    params: &RewardMapParams,
    cfg: &ForecastConfig,
) -> Result<ForecastOutput> {
    cfg.validate()?;
    let prepared = prepare_scene(scene, cfg)?;
    let spec = prepared.window.spec;
    let reward = reward_forward(&prepared.features, params)?;
    let soft = soft_value_iteration(&reward, &spec, cfg.horizon)?;
    let rollouts = sample_rollouts(
        &soft.policy,
        &reward,
        prepared.start(),
        cfg.rollouts,
        cfg.horizon,
        cfg.seed,
    )?;
    let steps = prepared.scene.future_len();
    let speed = prepared.scene.current_speed();
    let dt = prepared.scene.dt;
    let proposals = rollouts
        .paths
        .iter()
        .map(|p| grt_to_trajectory(p, &spec, steps, speed, dt))
        .collect::<Result<Vec<_>>>()?;
    let forecast = decode(proposals, &rollouts.path_reward, cfg.temperature, cfg)?;
    Ok(ForecastOutput {
        forecast,
        prepared,
        reward,
        policy: soft.policy,
        rollouts,
    })
}

/// Reasoning-free baseline: kinematic proposals from the current state,
/// scored by cluster frequency alone.
pub fn forecast_vanilla(scene: &SceneContext, cfg: &ForecastConfig) -> Result<Forecast> {
    cfg.validate()?;
    scene.validate()?;
    let scene = scene.normalize_to_target()?;
    let proposals = KinematicSampler::default().sample(
        cfg.rollouts,
        scene.future_len(),
        scene.current_speed(),
        scene.dt,
        cfg.seed,
    );
    let zeros = vec![0.0; proposals.len()];
    decode(proposals, &zeros, f64::INFINITY, cfg)
}
