use crate::{Error, Point, Result};

/// Mean elementwise Huber loss.
pub fn huber(pred: &[f64], gt: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(
            "huber delta must be positive".into(),
        ));
    }
    if pred.len() != gt.len() {
        return Err(Error::Shape("huber inputs differ in length".into()));
    }
    if pred.is_empty() {
        return Err(Error::Empty("huber input"));
    }
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let e = (p - g).abs();
            if e <= delta {
                0.5 * e * e
            } else {
                delta * (e - 0.5 * delta)
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Candidate with the lowest mean displacement; ties to the lowest index.
pub fn winner_takes_all_select(
    candidates: &[alloc::vec::Vec<Point>],
    gt: &[Point],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    if candidates.iter().any(|c| c.len() != gt.len()) || gt.is_empty() {
        return Err(Error::Shape(
            "candidate length differs from ground truth".into(),
        ));
    }
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let e = super::ade(c, gt);
        if e < best.1 {
            best = (i, e);
        }
    }
    Ok(best.0)
}

/// Hinge on every non-positive score, averaged over the `K - 1` negatives.
pub fn max_margin(scores: &[f64], positive: usize, margin: f64) -> Result<f64> {
    if positive >= scores.len() {
        return Err(Error::InvalidArgument("positive index out of range".into()));
    }
    if scores.len() == 1 {
        return Ok(0.0);
    }
    let pos = scores[positive];
    let total: f64 = scores
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != positive)
        .map(|(_, &s)| (s - pos + margin).max(0.0))
        .sum();
    Ok(total / (scores.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ogm: f64,
    pub reg: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            ogm: 1.0,
            reg: 1.0,
            cls: 1.0,
        }
    }
}

pub fn total_loss(l_irl: f64, l_ogm: f64, l_reg: f64, l_cls: f64, w: LossWeights) -> f64 {
    l_irl + w.ogm * l_ogm + w.reg * l_reg + w.cls * l_cls
}
