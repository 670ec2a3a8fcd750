use crate::{Error, Point, Result};

/// Endpoint distance above which a scene counts as a miss, meters.
pub const MISS_THRESHOLD: f64 = 2.0;

fn check(modes: &[alloc::vec::Vec<Point>], gt: &[Point]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::Empty("modes"));
    }
    if gt.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    if modes.iter().any(|m| m.len() != gt.len()) {
        return Err(Error::Shape("mode length differs from ground truth".into()));
    }
    Ok(())
}

fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Mean pointwise distance of one trajectory.
pub fn ade(traj: &[Point], gt: &[Point]) -> f64 {
    traj.iter().zip(gt).map(|(&a, &b)| dist(a, b)).sum::<f64>() / gt.len() as f64
}

pub fn fde(traj: &[Point], gt: &[Point]) -> f64 {
    dist(traj[traj.len() - 1], gt[gt.len() - 1])
}

/// Index of the minimum, first one on ties.
fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, v)| if v < best.1 { (i, v) } else { best },
    )
}

pub fn min_ade(modes: &[alloc::vec::Vec<Point>], gt: &[Point]) -> Result<f64> {
    check(modes, gt)?;
    Ok(argmin(modes.iter().map(|m| ade(m, gt))).1)
}

pub fn min_fde(modes: &[alloc::vec::Vec<Point>], gt: &[Point]) -> Result<f64> {
    check(modes, gt)?;
    Ok(argmin(modes.iter().map(|m| fde(m, gt))).1)
}

/// Mode with the closest endpoint; ties go to the lowest index.
pub fn best_mode(modes: &[alloc::vec::Vec<Point>], gt: &[Point]) -> Result<usize> {
    check(modes, gt)?;
    Ok(argmin(modes.iter().map(|m| fde(m, gt))).0)
}

/// Fraction of scenes whose `min_fde` exceeds `threshold` (strictly).
pub fn miss_rate(min_fdes: &[f64], threshold: f64) -> Result<f64> {
    if min_fdes.is_empty() {
        return Err(Error::Empty("scene set"));
    }
    Ok(min_fdes.iter().filter(|&&d| d > threshold).count() as f64 / min_fdes.len() as f64)
}

pub fn brier(p_best: f64) -> f64 {
    let q = 1.0 - p_best;
    q * q
}

pub fn brier_min_fde(min_fde: f64, p_best: f64) -> f64 {
    min_fde + brier(p_best)
}

/// Per-scene metrics, or their unweighted mean over scenes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub k: usize,
    pub min_ade: f64,
    pub min_fde: f64,
    /// 0 or 1 for a single scene.
    pub miss_rate: f64,
    pub brier: f64,
    pub brier_min_fde: f64,
}

impl MetricReport {
    pub fn for_scene(
        modes: &[alloc::vec::Vec<Point>],
        probs: &[f64],
        gt: &[Point],
    ) -> Result<Self> {
        if probs.len() != modes.len() {
            return Err(Error::Shape("one probability per mode required".into()));
        }
        let best = best_mode(modes, gt)?;
        let p_best = probs[best];
        if !(0.0..=1.0).contains(&p_best) {
            return Err(Error::InvalidArgument(
                "mode probability outside [0, 1]".into(),
            ));
        }
        let min_fde = min_fde(modes, gt)?;
        Ok(MetricReport {
            k: modes.len(),
            min_ade: min_ade(modes, gt)?,
            min_fde,
            miss_rate: if min_fde > MISS_THRESHOLD { 1.0 } else { 0.0 },
            brier: brier(p_best),
            brier_min_fde: brier_min_fde(min_fde, p_best),
        })
    }

    /// Unweighted mean in the given order.
    pub fn aggregate(reports: &[MetricReport]) -> Result<Self> {
        let first = reports.first().ok_or(Error::Empty("report set"))?;
        let n = reports.len() as f64;
        let mut out = MetricReport {
            k: first.k,
            ..MetricReport::default()
        };
        for r in reports {
            out.min_ade += r.min_ade;
            out.min_fde += r.min_fde;
            out.miss_rate += r.miss_rate;
            out.brier += r.brier;
            out.brier_min_fde += r.brier_min_fde;
        }
        out.min_ade /= n;
        out.min_fde /= n;
        out.miss_rate /= n;
        out.brier /= n;
        out.brier_min_fde /= n;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn line(y: f64) -> Vec<Point> {
        (1..=5).map(|i| [i as f64, y]).collect()
    }

    #[test]
    fn displacement_examples() {
        let gt = line(0.0);
        assert_eq!(min_ade(&[gt.clone()], &gt).unwrap(), 0.0);
        let shifted: Vec<Point> = gt.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
        assert_eq!(min_ade(&[shifted.clone()], &gt).unwrap(), 5.0);
        assert_eq!(min_ade(&[gt.clone(), shifted], &gt).unwrap(), 0.0);
        assert!(min_ade(&[], &gt).is_err());
    }

    #[test]
    fn endpoint_examples() {
        let gt = line(0.0);
        assert_eq!(min_fde(&[gt.clone()], &gt).unwrap(), 0.0);
        let modes = [line(2.5), line(1.9)];
        assert!((min_fde(&modes, &gt).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(best_mode(&modes, &gt).unwrap(), 1);
        assert_eq!(best_mode(&[line(1.0), line(-1.0)], &gt).unwrap(), 0);
    }

    #[test]
    fn miss_rate_examples() {
        assert_eq!(miss_rate(&[0.0, 0.0], MISS_THRESHOLD).unwrap(), 0.0);
        assert_eq!(miss_rate(&[1.0, 3.0], MISS_THRESHOLD).unwrap(), 0.5);
        assert_eq!(miss_rate(&[2.0], MISS_THRESHOLD).unwrap(), 0.0);
        assert!(miss_rate(&[], MISS_THRESHOLD).is_err());
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(1.0), 0.0);
        assert_eq!(brier(0.0), 1.0);
        assert!((brier_min_fde(1.2, 0.7) - 1.29).abs() < 1e-12);
    }

    #[test]
    fn scene_report_uses_best_endpoint_probability() {
        let gt = line(0.0);
        let r = MetricReport::for_scene(&[line(5.0), line(0.5)], &[0.9, 0.1], &gt).unwrap();
        assert_eq!(r.k, 2);
        assert!((r.brier - 0.81).abs() < 1e-12);
        assert_eq!(r.miss_rate, 0.0);
        assert_eq!(r.brier_min_fde, r.min_fde + r.brier);
        let agg = MetricReport::aggregate(&[r, MetricReport { min_fde: 3.0, ..r }]).unwrap();
        assert!((agg.min_fde - (r.min_fde + 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(
            MetricReport::aggregate(&vec![r; 3]).unwrap().min_ade,
            r.min_ade
        );
    }
}
