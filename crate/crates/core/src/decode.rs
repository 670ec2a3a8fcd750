//! Proposal clustering, anchor refinement and mode scoring.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Stream;
use crate::{Error, Point, Result};

/// Multimodal forecast in the target-centric frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub proposals: Vec<Vec<Point>>,
    pub membership: Vec<usize>,
    pub anchors: Vec<Vec<Point>>,
    pub offsets: Vec<Vec<Point>>,
    /// `anchors + offsets`, elementwise.
    pub modes: Vec<Vec<Point>>,
    pub probs: Vec<f64>,
}

impl Forecast {
    /// Assembles the final modes. Offsets are adjusted by at most an ulp so
    /// that `mode - anchor == offset` holds exactly in floating point.
    pub fn assemble(
        proposals: Vec<Vec<Point>>,
        membership: Vec<usize>,
        anchors: Vec<Vec<Point>>,
        offsets: Vec<Vec<Point>>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if anchors.len() != offsets.len() || anchors.len() != probs.len() {
            return Err(Error::Shape(
                "anchors, offsets and probabilities disagree in K".into(),
            ));
        }
        let mut exact = Vec::with_capacity(offsets.len());
        let mut modes = Vec::with_capacity(offsets.len());
        for (a, d) in anchors.iter().zip(&offsets) {
            if a.len() != d.len() {
                return Err(Error::Shape("anchor and offset lengths differ".into()));
            }
            let mut de = Vec::with_capacity(d.len());
            let mut m = Vec::with_capacity(d.len());
            for (pa, pd) in a.iter().zip(d) {
                let x = exact_offset(pa[0], pd[0]);
                let y = exact_offset(pa[1], pd[1]);
                de.push([x, y]);
                m.push([pa[0] + x, pa[1] + y]);
            }
            exact.push(de);
            modes.push(m);
        }
        Ok(Forecast {
            proposals,
            membership,
            anchors,
            offsets: exact,
            modes,
            probs,
        })
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }
}

/// Nearest `d'` to `d` with `(a + d') - a == d'` exactly.
fn exact_offset(a: f64, d: f64) -> f64 {
    let mut d = d;
    for _ in 0..8 {
        let next = (a + d) - a;
        if next == d {
            return d;
        }
        d = next;
    }
    d
}

fn sq_dist(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]))
        .sum()
}

fn max_point_shift(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| libm::hypot(p[0] - q[0], p[1] - q[1]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub anchors: Vec<Vec<Point>>,
    pub membership: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_SHIFT_TOL: f64 = 1e-6;

/// Nearest centroid, ties to the lowest index.
fn nearest(p: &[Point], centroids: &[Vec<Point>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// K-means over flattened trajectories with k-means++ seeding.
pub fn cluster_proposals(proposals: &[Vec<Point>], k: usize, seed: u64) -> Result<Clustering> {
    let n = proposals.len();
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(alloc::format!(
            "{n} proposals cannot form {k} clusters"
        )));
    }
    let len = proposals[0].len();
    if proposals.iter().any(|p| p.len() != len) {
        return Err(Error::Shape("proposals have different lengths".into()));
    }
    if proposals
        .iter()
        .flatten()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::NonFinite("proposal"));
    }

    let mut rng = Stream::new(seed, 0);
    let mut centroids: Vec<Vec<Point>> = vec![proposals[rng.index(n)].clone()];
    let mut d2: Vec<f64> = proposals
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let pick = rng.weighted(&d2).unwrap_or(0);
        centroids.push(proposals[pick].clone());
        let c = centroids.last().unwrap();
        for (i, p) in proposals.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c));
        }
    }

    let mut membership = vec![0; n];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITERS {
        iterations += 1;
        let mut wcss = 0.0;
        let mut cost = vec![0.0; n];
        for (i, p) in proposals.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            membership[i] = c;
            cost[i] = d;
            wcss += d;
        }
        wcss_history.push(wcss);

        let mut sums = vec![vec![[0.0; 2]; len]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in proposals.iter().zip(&membership) {
            counts[c] += 1;
            for (s, q) in sums[c].iter_mut().zip(p) {
                s[0] += q[0];
                s[1] += q[1];
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next: Vec<Point> = if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                sums[c].iter().map(|s| [s[0] * inv, s[1] * inv]).collect()
            } else {
                // Re-seed on the point worst served by its centroid.
                let far = (0..n).fold(0, |b, i| if cost[i] > cost[b] { i } else { b });
                cost[far] = 0.0;
                proposals[far].clone()
            };
            shift = shift.max(max_point_shift(&next, &centroids[c]));
            centroids[c] = next;
        }
        if shift < KMEANS_SHIFT_TOL {
            break;
        }
    }
    // Final assignment against the returned anchors.
    for (i, p) in proposals.iter().enumerate() {
        membership[i] = nearest(p, &centroids).0;
    }
    Ok(Clustering {
        anchors: centroids,
        membership,
        wcss_history,
        iterations,
    })
}

/// In-place Cholesky solve of a symmetric positive definite system.
fn cholesky_solve(mut a: Vec<f64>, n: usize, rhs: &mut [f64]) {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= a[i * n + k] * rhs[k];
        }
        rhs[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= a[k * n + i] * rhs[k];
        }
        rhs[i] = s / a[i * n + i];
    }
}

/// `I + lambda * D^T D` where `D` takes second differences of
/// `[0, z_1, ..., z_n]` (the leading origin is fixed, so its column drops).
fn smoothing_matrix(n: usize, lambda: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    // Row r of D covers augmented indices r, r+1, r+2; free index = aug - 1.
    for r in 0..n.saturating_sub(1) {
        let taps = [
            (r as isize - 1, 1.0),
            (r as isize, -2.0),
            (r as isize + 1, 1.0),
        ];
        for &(i, wi) in &taps {
            for &(j, wj) in &taps {
                if i >= 0 && j >= 0 {
                    m[i as usize * n + j as usize] += lambda * wi * wj;
                }
            }
        }
    }
    m
}

/// Smoothing offsets for each anchor: per axis, the `z` minimizing
/// `|z - a|^2 + lambda |D [0; z]|^2`, returned as `z - a`. The trajectory
/// is treated as continuing from the origin, which stays fixed.
pub fn refine(anchors: &[Vec<Point>], lambda: f64) -> Result<Vec<Vec<Point>>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "smoothing weight must be finite and non-negative".into(),
        ));
    }
    if anchors
        .iter()
        .flatten()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::NonFinite("anchor"));
    }
    let mut out = Vec::with_capacity(anchors.len());
    for a in anchors {
        let n = a.len();
        if lambda == 0.0 || n == 0 {
            out.push(vec![[0.0; 2]; n]);
            continue;
        }
        let m = smoothing_matrix(n, lambda);
        let mut offsets = vec![[0.0; 2]; n];
        for axis in 0..2 {
            let mut z: Vec<f64> = a.iter().map(|p| p[axis]).collect();
            cholesky_solve(m.clone(), n, &mut z);
            for (o, (zi, p)) in offsets.iter_mut().zip(z.iter().zip(a)) {
                o[axis] = zi - p[axis];
            }
        }
        out.push(offsets);
    }
    Ok(out)
}

/// Mode probabilities `p_k ∝ (n_k / L) exp(mean_reward_k / tau)`. Empty
/// clusters get zero. `tau = inf` gives plain frequencies.
pub fn score_modes(
    membership: &[usize],
    path_reward: &[f64],
    k: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(
            "temperature must be positive".into(),
        ));
    }
    if membership.len() != path_reward.len() {
        return Err(Error::Shape(
            "membership and rewards differ in length".into(),
        ));
    }
    if membership.is_empty() {
        return Err(Error::Empty("membership"));
    }
    if let Some(&bad) = membership.iter().find(|&&m| m >= k) {
        return Err(Error::InvalidArgument(alloc::format!(
            "cluster index {bad} out of range for K = {k}"
        )));
    }
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for (&m, &r) in membership.iter().zip(path_reward) {
        counts[m] += 1;
        sums[m] += r;
    }
    let total = membership.len() as f64;
    let logits: Vec<f64> = (0..k)
        .map(|c| {
            if counts[c] == 0 {
                f64::NEG_INFINITY
            } else {
                let mean = sums[c] / counts[c] as f64;
                let temper = if tau.is_infinite() { 0.0 } else { mean / tau };
                libm::log(counts[c] as f64 / total) + temper
            }
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("mode score"));
    }
    let weights: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / z).collect())
}
