use alloc::vec::Vec;

use super::LaneSegment;
use crate::Point;

/// Arc-length parameterized polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    cumulative: Vec<f64>,
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    /// Signed lateral offset, positive on the left.
    pub lateral: f64,
    /// Heading of the segment holding the foot point.
    pub heading: f64,
}

impl Polyline {
    /// Consecutive duplicate points are dropped.
    pub fn new(points: Vec<Point>) -> Self {
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| dist(*q, p) > 1e-12) {
                pts.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc += dist(pts[i - 1], *p);
            }
            cumulative.push(acc);
        }
        Polyline {
            points: pts,
            cumulative,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn segment_for(&self, s: f64) -> usize {
        let n = self.points.len();
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Point at arc length `s`, extrapolating along the end segments.
    pub fn point_at(&self, s: f64) -> Point {
        match self.points.len() {
            0 => [0.0, 0.0],
            1 => self.points[0],
            _ => {
                let i = self.segment_for(s);
                let (a, b) = (self.points[i], self.points[i + 1]);
                let len = self.cumulative[i + 1] - self.cumulative[i];
                let t = (s - self.cumulative[i]) / len;
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            }
        }
    }

    /// Point at arc length `s`, holding the end points instead of extrapolating.
    pub fn point_at_clamped(&self, s: f64) -> Point {
        self.point_at(s.clamp(0.0, self.length()))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let i = self.segment_for(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        libm::atan2(b[1] - a[1], b[0] - a[0])
    }

    /// Point at `s` shifted `lateral` meters to the left of the path.
    pub fn offset_point(&self, s: f64, lateral: f64) -> Point {
        let p = self.point_at(s);
        let (sin, cos) = libm::sincos(self.heading_at(s));
        [p[0] - sin * lateral, p[1] + cos * lateral]
    }

    /// Parallel copy shifted `lateral` meters to the left.
    pub fn offset(&self, lateral: f64) -> Polyline {
        let n = self.points.len();
        let pts = (0..n)
            .map(|i| {
                let h = if i + 1 < n {
                    libm::atan2(
                        self.points[i + 1][1] - self.points[i][1],
                        self.points[i + 1][0] - self.points[i][0],
                    )
                } else {
                    libm::atan2(
                        self.points[i][1] - self.points[i - 1][1],
                        self.points[i][0] - self.points[i - 1][0],
                    )
                };
                let (sin, cos) = libm::sincos(h);
                [
                    self.points[i][0] - sin * lateral,
                    self.points[i][1] + cos * lateral,
                ]
            })
            .collect();
        Polyline::new(pts)
    }

    pub fn project(&self, p: Point) -> Option<Projection> {
        let mut best: Option<(f64, Projection)> = None;
        for i in 0..self.points.len().saturating_sub(1) {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (d2, t, cross) = segment_geometry(a, b, p);
            if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
                let len = self.cumulative[i + 1] - self.cumulative[i];
                let lateral = libm::sqrt(d2).copysign(if cross >= 0.0 { 1.0 } else { -1.0 });
                best = Some((
                    d2,
                    Projection {
                        s: self.cumulative[i] + t * len,
                        lateral,
                        heading: libm::atan2(b[1] - a[1], b[0] - a[0]),
                    },
                ));
            }
        }
        best.map(|(_, proj)| proj)
    }

    /// Resamples into `n` equal-length lane segments.
    pub fn to_segments(&self, n: usize, lane_type: f64) -> Vec<LaneSegment> {
        let len = self.length();
        (0..n)
            .map(|i| {
                let s0 = len * i as f64 / n as f64;
                let s1 = len * (i + 1) as f64 / n as f64;
                let start = self.point_at(s0);
                let end = self.point_at(s1);
                LaneSegment {
                    start,
                    end,
                    heading: libm::atan2(end[1] - start[1], end[0] - start[0]),
                    lane_type,
                }
            })
            .collect()
    }

    pub fn from_segments(segments: &[LaneSegment]) -> Polyline {
        let mut pts = Vec::with_capacity(segments.len() + 1);
        if let Some(first) = segments.first() {
            pts.push(first.start);
        }
        pts.extend(segments.iter().map(|s| s.end));
        Polyline::new(pts)
    }
}

/// Squared distance to segment `a-b`, clamped foot parameter, and the cross
/// product sign (positive when `p` lies left of `a -> b`).
pub(crate) fn segment_geometry(a: Point, b: Point, p: Point) -> (f64, f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let fx = a[0] + t * dx - p[0];
    let fy = a[1] + t * dy - p[1];
    let cross = dx * (p[1] - a[1]) - dy * (p[0] - a[0]);
    (fx * fx + fy * fy, t, cross)
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Incremental builder for lane centerlines from straights and arcs.
pub(crate) struct PathBuilder {
    points: Vec<Point>,
    heading: f64,
    step: f64,
}

impl PathBuilder {
    pub fn new(start: Point, heading: f64) -> Self {
        PathBuilder {
            points: alloc::vec![start],
            heading,
            step: 0.5,
        }
    }

    fn last(&self) -> Point {
        *self.points.last().unwrap()
    }

    pub fn straight(mut self, length: f64) -> Self {
        let p = self.last();
        let n = libm::ceil(length / self.step).max(1.0) as usize;
        let (s, c) = libm::sincos(self.heading);
        for i in 1..=n {
            let d = length * i as f64 / n as f64;
            self.points.push([p[0] + c * d, p[1] + s * d]);
        }
        self
    }

    /// Circular arc; positive `angle` turns left.
    pub fn arc(mut self, radius: f64, angle: f64) -> Self {
        let p = self.last();
        let side = if angle >= 0.0 { 1.0 } else { -1.0 };
        let (s, c) = libm::sincos(self.heading);
        let center = [p[0] - s * radius * side, p[1] + c * radius * side];
        let start_angle = libm::atan2(p[1] - center[1], p[0] - center[0]);
        let n = libm::ceil(radius * angle.abs() / self.step).max(1.0) as usize;
        for i in 1..=n {
            let a = start_angle + angle * i as f64 / n as f64;
            let (sa, ca) = libm::sincos(a);
            self.points
                .push([center[0] + radius * ca, center[1] + radius * sa]);
        }
        self.heading += angle;
        self
    }

    pub fn build(self) -> Polyline {
        Polyline::new(self.points)
    }
}
