//! Per-cell map from context features to reward.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Stream;
use crate::scene::FeatureStack;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    Linear,
    /// `F -> hidden` affine, rectifier, `hidden -> 1` affine.
    TwoLayer,
}

/// Reward-map parameters.
///
/// `theta` is flat: `[w (F), b]` for the linear map and
/// `[W1 (hidden x F), b1 (hidden), w2 (hidden), b2]` for the two-layer map.
/// `input_scale` multiplies each feature channel before the map and is not
/// trained.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMapParams {
    pub mode: RewardMode,
    pub n_features: usize,
    pub hidden: usize,
    pub input_scale: Vec<f64>,
    pub theta: Vec<f64>,
}

impl RewardMapParams {
    pub fn param_count(mode: RewardMode, n_features: usize, hidden: usize) -> usize {
        match mode {
            RewardMode::Linear => n_features + 1,
            RewardMode::TwoLayer => hidden * n_features + 2 * hidden + 1,
        }
    }

    pub fn zeros(mode: RewardMode, n_features: usize, hidden: usize) -> Self {
        RewardMapParams {
            mode,
            n_features,
            hidden,
            input_scale: vec![1.0; n_features],
            theta: vec![0.0; Self::param_count(mode, n_features, hidden)],
        }
    }

    pub fn linear(weights: &[f64], bias: f64) -> Self {
        let mut theta = weights.to_vec();
        theta.push(bias);
        RewardMapParams {
            mode: RewardMode::Linear,
            n_features: weights.len(),
            hidden: 0,
            input_scale: vec![1.0; weights.len()],
            theta,
        }
    }

    /// Seeded initialization. Linear maps start at zero (uniform reward);
    /// two-layer maps get scaled Gaussian first-layer weights.
    pub fn init(
        mode: RewardMode,
        n_features: usize,
        hidden: usize,
        input_scale: Vec<f64>,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros(mode, n_features, hidden);
        p.input_scale = input_scale;
        if mode == RewardMode::TwoLayer {
            let mut rng = Stream::new(seed, 0x5eed);
            let w1_std = 1.0 / libm::sqrt(n_features as f64);
            let w2_std = 0.1 / libm::sqrt(hidden as f64);
            let (w1, rest) = p.theta.split_at_mut(hidden * n_features);
            w1.iter_mut().for_each(|w| *w = w1_std * rng.normal());
            let (b1, rest) = rest.split_at_mut(hidden);
            b1.iter_mut().for_each(|b| *b = 0.1);
            rest[..hidden]
                .iter_mut()
                .for_each(|w| *w = w2_std * rng.normal());
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    fn check(&self, features: &FeatureStack) -> Result<()> {
        if features.channels() != self.n_features || self.input_scale.len() != self.n_features {
            return Err(Error::Shape(format!(
                "reward map expects {} channels, features have {}",
                self.n_features,
                features.channels()
            )));
        }
        if self.theta.len() != Self::param_count(self.mode, self.n_features, self.hidden) {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries",
                self.theta.len()
            )));
        }
        Ok(())
    }

    fn scaled(&self, phi: &[f64], buf: &mut [f64]) {
        for ((b, &x), &s) in buf.iter_mut().zip(phi).zip(&self.input_scale) {
            *b = x * s;
        }
    }

    /// Unshifted reward of one cell.
    fn eval_cell(&self, x: &[f64], hidden_buf: &mut [f64]) -> f64 {
        let f = self.n_features;
        match self.mode {
            RewardMode::Linear => dot(&self.theta[..f], x) + self.theta[f],
            RewardMode::TwoLayer => {
                let h = self.hidden;
                let (w1, rest) = self.theta.split_at(h * f);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                for (j, z) in hidden_buf.iter_mut().enumerate() {
                    *z = (dot(&w1[j * f..(j + 1) * f], x) + b1[j]).max(0.0);
                }
                dot(w2, hidden_buf) + b2[0]
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-cell reward, shifted so the maximum is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    shift: f64,
}

impl RewardField {
    /// Wraps raw rewards and applies the max-zero shift.
    pub fn from_raw(rows: usize, cols: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != rows * cols {
            return Err(Error::Shape(format!(
                "reward needs {} cells, got {}",
                rows * cols,
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        let shift = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = raw.into_iter().map(|v| v - shift).collect();
        Ok(RewardField {
            rows,
            cols,
            values,
            shift,
        })
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        RewardField {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            shift: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The constant subtracted from the raw rewards.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Every value moved by `c`; the recorded shift absorbs it.
    pub fn offset(&self, c: f64) -> RewardField {
        RewardField {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v + c).collect(),
            shift: self.shift - c,
        }
    }

    /// Rewards before the shift.
    pub fn unshifted(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + self.shift).collect()
    }
}

pub fn reward_forward(features: &FeatureStack, params: &RewardMapParams) -> Result<RewardField> {
    params.check(features)?;
    if !features.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let n = features.rows() * features.cols();
    let mut x = vec![0.0; params.n_features];
    let mut hidden = vec![0.0; params.hidden];
    let raw = (0..n)
        .map(|flat| {
            params.scaled(features.at(flat), &mut x);
            params.eval_cell(&x, &mut hidden)
        })
        .collect();
    RewardField::from_raw(features.rows(), features.cols(), raw)
}

/// Gradient of `sum_s grad_reward(s) * R_unshifted(s)` with respect to
/// `params.theta`.
pub fn reward_backward(
    features: &FeatureStack,
    params: &RewardMapParams,
    grad_reward: &[f64],
) -> Result<Vec<f64>> {
    params.check(features)?;
    let n = features.rows() * features.cols();
    if grad_reward.len() != n {
        return Err(Error::Shape(format!(
            "reward gradient needs {n} cells, got {}",
            grad_reward.len()
        )));
    }
    if grad_reward.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("reward gradient"));
    }
    let f = params.n_features;
    let mut grad = vec![0.0; params.theta.len()];
    let mut x = vec![0.0; f];
    match params.mode {
        RewardMode::Linear => {
            for (flat, &g) in grad_reward.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                params.scaled(features.at(flat), &mut x);
                for (gw, xi) in grad[..f].iter_mut().zip(&x) {
                    *gw += g * xi;
                }
                grad[f] += g;
            }
        }
        RewardMode::TwoLayer => {
            let h = params.hidden;
            let (w1, rest) = params.theta.split_at(h * f);
            let (b1, rest) = rest.split_at(h);
            let w2 = &rest[..h];
            let mut z = vec![0.0; h];
            for (flat, &g) in grad_reward.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                params.scaled(features.at(flat), &mut x);
                for j in 0..h {
                    z[j] = dot(&w1[j * f..(j + 1) * f], &x) + b1[j];
                }
                for j in 0..h {
                    let a = z[j].max(0.0);
                    grad[h * f + h + j] += g * a;
                    if z[j] > 0.0 {
                        let gz = g * w2[j];
                        for (gw, xi) in grad[j * f..(j + 1) * f].iter_mut().zip(&x) {
                            *gw += gz * xi;
                        }
                        grad[h * f + j] += gz;
                    }
                }
                grad[h * f + 2 * h] += g;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_stack(rows: usize, cols: usize, seed: u64) -> FeatureStack {
        let mut rng = Stream::new(seed, 1);
        let values = (0..rows * cols * FeatureStack::CHANNELS)
            .map(|_| rng.range(-1.0, 1.0))
            .collect();
        FeatureStack::new(rows, cols, values).unwrap()
    }

    #[test]
    fn zero_linear_map_is_uniform() {
        let f = random_stack(4, 5, 0);
        let r = reward_forward(&f, &RewardMapParams::zeros(RewardMode::Linear, 6, 0)).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn on_road_weight_penalizes_off_road() {
        let mut values = Vec::new();
        for i in 0..9 {
            values.extend_from_slice(&[
                if i % 2 == 0 { 1.0 } else { 0.0 },
                0.3,
                0.0,
                0.0,
                0.0,
                0.0,
            ]);
        }
        let f = FeatureStack::new(3, 3, values).unwrap();
        let r = reward_forward(
            &f,
            &RewardMapParams::linear(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0),
        )
        .unwrap();
        for (i, &v) in r.values().iter().enumerate() {
            assert_eq!(v, if i % 2 == 0 { 0.0 } else { -1.0 });
        }
    }

    #[test]
    fn shift_keeps_argmax() {
        let f = random_stack(6, 6, 3);
        let p = RewardMapParams::init(RewardMode::TwoLayer, 6, 16, vec![1.0; 6], 9);
        let r = reward_forward(&f, &p).unwrap();
        assert!(r.values().iter().all(|v| v.is_finite()));
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(argmax(r.values()), argmax(&r.unshifted()));
        assert_eq!(
            r.values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
            0.0
        );
    }

    #[test]
    fn linear_backward_is_feature_sum() {
        let f = random_stack(3, 4, 1);
        let p = RewardMapParams::linear(&[0.1, -0.2, 0.3, 0.0, 0.5, -0.1], 0.2);
        let g: Vec<f64> = (0..12).map(|i| i as f64 - 5.0).collect();
        let grad = reward_backward(&f, &p, &g).unwrap();
        for c in 0..6 {
            let expect: f64 = (0..12).map(|s| g[s] * f.at(s)[c]).sum();
            assert!((grad[c] - expect).abs() < 1e-12);
        }
        assert!((grad[6] - g.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gradient() {
        let f = random_stack(3, 3, 2);
        for p in [
            RewardMapParams::linear(&[1.0; 6], 0.0),
            RewardMapParams::init(RewardMode::TwoLayer, 6, 4, vec![1.0; 6], 0),
        ] {
            assert!(reward_backward(&f, &p, &[0.0; 9])
                .unwrap()
                .iter()
                .all(|&g| g == 0.0));
        }
    }

    #[test]
    fn two_layer_matches_finite_differences() {
        let f = random_stack(4, 4, 7);
        let p = RewardMapParams::init(RewardMode::TwoLayer, 6, 16, vec![1.0; 6], 4);
        let mut rng = Stream::new(11, 0);
        let g: Vec<f64> = (0..16).map(|_| rng.range(-1.0, 1.0)).collect();
        let objective = |p: &RewardMapParams| -> f64 {
            let r = reward_forward(&f, p).unwrap();
            r.unshifted().iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let grad = reward_backward(&f, &p, &g).unwrap();
        let eps = 1e-5;
        for k in 0..p.theta.len() {
            let mut hi = p.clone();
            hi.theta[k] += eps;
            let mut lo = p.clone();
            lo.theta[k] -= eps;
            let fd = (objective(&hi) - objective(&lo)) / (2.0 * eps);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
            assert!(
                rel < 1e-5 || (fd - grad[k]).abs() < 1e-9,
                "param {k}: fd {fd} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let f = random_stack(3, 3, 0);
        let p = RewardMapParams::linear(&[1.0; 5], 0.0);
        assert!(reward_forward(&f, &p).is_err());
        let p = RewardMapParams::linear(&[1.0; 6], 0.0);
        assert!(reward_backward(&f, &p, &[0.0; 4]).is_err());
        let mut values = f.values().to_vec();
        values[3] = f64::NAN;
        let bad = FeatureStack::new(3, 3, values).unwrap();
        assert_eq!(reward_forward(&bad, &p), Err(Error::NonFinite("features")));
    }
}
