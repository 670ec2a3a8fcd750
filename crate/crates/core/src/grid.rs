//! The discrete bird's-eye grid MDP.
//!
//! Rows run along the target-frame `+x` axis and columns along `+y`. The
//! anchor cell holds the target's current position, whose cell center is the
//! frame origin. Transitions are deterministic 8-connected moves plus `Stay`;
//! moves that would leave the grid are masked rather than clamped.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        CellIndex { row, col }
    }

    /// Chebyshev distance; two cells are MDP-adjacent when this is at most 1.
    pub fn chebyshev(self, other: CellIndex) -> usize {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr.max(dc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Stay,
    Forward,
    ForwardLeft,
    Left,
    BackLeft,
    Back,
    BackRight,
    Right,
    ForwardRight,
}

impl Action {
    pub const COUNT: usize = 9;

    /// Fixed action order used by every policy table.
    pub const ALL: [Action; 9] = [
        Action::Stay,
        Action::Forward,
        Action::ForwardLeft,
        Action::Left,
        Action::BackLeft,
        Action::Back,
        Action::BackRight,
        Action::Right,
        Action::ForwardRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// `(d_row, d_col)`; rows are `+x`, columns are `+y` (left).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Stay => (0, 0),
            Action::Forward => (1, 0),
            Action::ForwardLeft => (1, 1),
            Action::Left => (0, 1),
            Action::BackLeft => (-1, 1),
            Action::Back => (-1, 0),
            Action::BackRight => (-1, -1),
            Action::Right => (0, -1),
            Action::ForwardRight => (1, -1),
        }
    }

    pub fn from_delta(dr: i64, dc: i64) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.delta() == (dr, dc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    resolution: f64,
    anchor: CellIndex,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, resolution: f64, anchor: CellIndex) -> Result<Self> {
        if rows < 3 || cols < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid must be at least 3x3, got {rows}x{cols}"
            )));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if anchor.row >= rows || anchor.col >= cols {
            return Err(Error::InvalidGrid(format!(
                "anchor ({}, {}) outside {rows}x{cols}",
                anchor.row, anchor.col
            )));
        }
        Ok(GridSpec {
            rows,
            cols,
            resolution,
            anchor,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn anchor(&self) -> CellIndex {
        self.anchor
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Row-major flat index.
    pub fn flat(&self, cell: CellIndex) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_at(&self, flat: usize) -> CellIndex {
        CellIndex::new(flat / self.cols, flat % self.cols)
    }

    /// Nearest cell center, rounding half away from zero. `None` when the
    /// point falls outside the grid.
    pub fn world_to_cell(&self, point: Point) -> Option<CellIndex> {
        if !point[0].is_finite() || !point[1].is_finite() {
            return None;
        }
        let row = self.anchor.row as i64 + libm::round(point[0] / self.resolution) as i64;
        let col = self.anchor.col as i64 + libm::round(point[1] / self.resolution) as i64;
        self.contains(row, col)
            .then(|| CellIndex::new(row as usize, col as usize))
    }

    pub fn cell_to_world(&self, cell: CellIndex) -> Result<Point> {
        if cell.row >= self.rows || cell.col >= self.cols {
            return Err(Error::OutOfBounds {
                row: cell.row as i64,
                col: cell.col as i64,
            });
        }
        Ok(self.center(cell))
    }

    /// Cell center without the bounds check.
    pub(crate) fn center(&self, cell: CellIndex) -> Point {
        [
            (cell.row as f64 - self.anchor.row as f64) * self.resolution,
            (cell.col as f64 - self.anchor.col as f64) * self.resolution,
        ]
    }

    /// Deterministic transition; `None` for moves that leave the grid.
    pub fn step(&self, cell: CellIndex, action: Action) -> Option<CellIndex> {
        let (dr, dc) = action.delta();
        let row = cell.row as i64 + dr;
        let col = cell.col as i64 + dc;
        self.contains(row, col)
            .then(|| CellIndex::new(row as usize, col as usize))
    }

    /// Flat successor table: `next[flat * 9 + a]` is the flat index reached by
    /// action `a`, or `usize::MAX` when masked.
    pub fn transition_table(&self) -> Vec<usize> {
        let mut next = Vec::with_capacity(self.len() * Action::COUNT);
        for flat in 0..self.len() {
            let cell = self.cell_at(flat);
            for a in Action::ALL {
                next.push(self.step(cell, a).map_or(usize::MAX, |c| self.flat(c)));
            }
        }
        next
    }

    /// Quantizes a trajectory onto the grid.
    ///
    /// The path stops at the first point that leaves the grid, drops
    /// consecutive duplicates, and fills gaps with cells on the 8-connected
    /// line so every consecutive pair is adjacent.
    pub fn quantize_trajectory(&self, points: &[Point]) -> Result<Quantized> {
        if points.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        let per_step: Vec<Option<CellIndex>> =
            points.iter().map(|&p| self.world_to_cell(p)).collect();
        let mut path: Vec<CellIndex> = Vec::new();
        for cell in per_step.iter() {
            let Some(cell) = *cell else { break };
            match path.last().copied() {
                Some(prev) if prev == cell => {}
                Some(prev) => {
                    line_fill(prev, cell, &mut path);
                }
                None => path.push(cell),
            }
        }
        Ok(Quantized { per_step, path })
    }

    /// Sub-grid covering every cell within Chebyshev `radius` of `start`.
    ///
    /// Cells farther away cannot be reached in `radius` steps, and the soft
    /// values of every reachable (cell, time) pair only look that far ahead,
    /// so planning inside the window is exact for paths from `start`.
    pub fn planning_window(&self, start: CellIndex, radius: usize) -> Result<Window> {
        if start.row >= self.rows || start.col >= self.cols {
            return Err(Error::OutOfBounds {
                row: start.row as i64,
                col: start.col as i64,
            });
        }
        let (r0, r1) = span(start.row, radius, self.rows);
        let (c0, c1) = span(start.col, radius, self.cols);
        let spec = GridSpec::new(
            r1 - r0 + 1,
            c1 - c0 + 1,
            self.resolution,
            CellIndex::new(start.row - r0, start.col - c0),
        )?;
        Ok(Window {
            spec,
            row0: r0,
            col0: c0,
        })
    }
}

fn span(center: usize, radius: usize, len: usize) -> (usize, usize) {
    let mut lo = center.saturating_sub(radius);
    let mut hi = (center + radius).min(len - 1);
    while hi - lo + 1 < 3 {
        if lo > 0 {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Appends the cells after `from` up to and including `to` along the
/// 8-connected line.
fn line_fill(from: CellIndex, to: CellIndex, out: &mut Vec<CellIndex>) {
    let dr = to.row as i64 - from.row as i64;
    let dc = to.col as i64 - from.col as i64;
    let n = dr.abs().max(dc.abs());
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let r = from.row as i64 + libm::round(dr as f64 * t) as i64;
        let c = from.col as i64 + libm::round(dc as f64 * t) as i64;
        out.push(CellIndex::new(r as usize, c as usize));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    /// One entry per input point; repeats kept.
    pub per_step: Vec<Option<CellIndex>>,
    /// Adjacent, duplicate-free state sequence.
    pub path: Vec<CellIndex>,
}

/// A rectangular sub-grid of a larger grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub spec: GridSpec,
    pub row0: usize,
    pub col0: usize,
}

impl Window {
    pub fn to_global(&self, cell: CellIndex) -> CellIndex {
        CellIndex::new(cell.row + self.row0, cell.col + self.col0)
    }

    pub fn to_local(&self, cell: CellIndex) -> Option<CellIndex> {
        let row = cell.row.checked_sub(self.row0)?;
        let col = cell.col.checked_sub(self.col0)?;
        (row < self.spec.rows() && col < self.spec.cols()).then_some(CellIndex::new(row, col))
    }

    /// Copies a per-cell field of the parent grid into window layout.
    pub fn crop<T: Copy>(&self, parent: &GridSpec, values: &[T], channels: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.spec.len() * channels);
        for r in 0..self.spec.rows() {
            let start = ((r + self.row0) * parent.cols() + self.col0) * channels;
            out.extend_from_slice(&values[start..start + self.spec.cols() * channels]);
        }
        out
    }

    /// Places a window field back into a zero-filled parent layout.
    pub fn embed(&self, parent: &GridSpec, values: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; parent.len()];
        for r in 0..self.spec.rows() {
            let dst = (r + self.row0) * parent.cols() + self.col0;
            let src = r * self.spec.cols();
            out[dst..dst + self.spec.cols()].copy_from_slice(&values[src..src + self.spec.cols()]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid128() -> GridSpec {
        GridSpec::new(128, 128, 1.0, CellIndex::new(64, 64)).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let g = grid128();
        assert_eq!(g.world_to_cell([0.0, 0.0]), Some(CellIndex::new(64, 64)));
        assert_eq!(g.world_to_cell([2.4, -1.6]), Some(CellIndex::new(66, 62)));
        assert_eq!(g.world_to_cell([200.0, 0.0]), None);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let g = grid128();
        assert_eq!(g.world_to_cell([0.5, -0.5]), Some(CellIndex::new(65, 63)));
        assert_eq!(g.world_to_cell([-1.5, 1.5]), Some(CellIndex::new(62, 66)));
    }

    #[test]
    fn cell_to_world_examples() {
        let g = grid128();
        assert_eq!(g.cell_to_world(CellIndex::new(64, 64)).unwrap(), [0.0, 0.0]);
        assert_eq!(g.cell_to_world(CellIndex::new(65, 64)).unwrap(), [1.0, 0.0]);
        let half = GridSpec::new(128, 128, 0.5, CellIndex::new(64, 64)).unwrap();
        assert_eq!(
            half.cell_to_world(CellIndex::new(64, 63)).unwrap(),
            [0.0, -0.5]
        );
        assert!(g.cell_to_world(CellIndex::new(128, 0)).is_err());
    }

    #[test]
    fn step_examples() {
        let g = grid128();
        assert_eq!(g.step(CellIndex::new(0, 0), Action::Back), None);
        assert_eq!(
            g.step(CellIndex::new(5, 5), Action::Stay),
            Some(CellIndex::new(5, 5))
        );
        assert_eq!(
            g.step(CellIndex::new(5, 5), Action::ForwardLeft),
            Some(CellIndex::new(6, 6))
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GridSpec::new(2, 5, 1.0, CellIndex::new(0, 0)).is_err());
        assert!(GridSpec::new(5, 5, 0.0, CellIndex::new(0, 0)).is_err());
        assert!(GridSpec::new(5, 5, 1.0, CellIndex::new(5, 0)).is_err());
    }

    #[test]
    fn quantize_straight_and_stationary() {
        let g = grid128();
        let straight: Vec<Point> = (0..5).map(|i| [i as f64, 0.0]).collect();
        let q = g.quantize_trajectory(&straight).unwrap();
        assert_eq!(q.path.len(), 5);
        assert!(q.path.iter().all(|c| c.col == 64));

        let still = vec![[0.0, 0.0]; 5];
        let q = g.quantize_trajectory(&still).unwrap();
        assert_eq!(q.per_step.len(), 5);
        assert!(q
            .per_step
            .iter()
            .all(|c| *c == Some(CellIndex::new(64, 64))));
        assert_eq!(q.path.len(), 1);
    }

    #[test]
    fn quantize_repairs_fast_motion() {
        // start plus three steps of two cells each: 0, 2, 4, 6 -> 0..=6
        let g = grid128();
        let fast: Vec<Point> = (0..4).map(|i| [2.0 * i as f64, 0.0]).collect();
        let q = g.quantize_trajectory(&fast).unwrap();
        assert_eq!(q.path.len(), 7);
        let rows: Vec<usize> = q.path.iter().map(|c| c.row).collect();
        assert_eq!(rows, vec![64, 65, 66, 67, 68, 69, 70]);
    }

    #[test]
    fn quantize_rejects_empty_and_truncates_at_exit() {
        let g = GridSpec::new(8, 8, 1.0, CellIndex::new(4, 4)).unwrap();
        assert!(g.quantize_trajectory(&[]).is_err());
        let pts: Vec<Point> = (0..8).map(|i| [i as f64, 0.0]).collect();
        let q = g.quantize_trajectory(&pts).unwrap();
        assert_eq!(q.path.len(), 4);
        assert_eq!(q.per_step[5], None);
    }

    #[test]
    fn window_crops_and_embeds() {
        let g = GridSpec::new(10, 12, 1.0, CellIndex::new(2, 6)).unwrap();
        let w = g.planning_window(g.anchor(), 3).unwrap();
        assert_eq!((w.row0, w.col0), (0, 3));
        assert_eq!((w.spec.rows(), w.spec.cols()), (6, 7));
        assert_eq!(w.to_global(w.spec.anchor()), g.anchor());
        let values: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let cropped = w.crop(&g, &values, 1);
        let back = w.embed(&g, &cropped);
        for flat in 0..g.len() {
            let c = g.cell_at(flat);
            let expect = if w.to_local(c).is_some() {
                values[flat]
            } else {
                0.0
            };
            assert_eq!(back[flat], expect);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(rows in 3usize..40, cols in 3usize..40, ar in 0usize..40, ac in 0usize..40,
                          d in 0.1f64..3.0, r in 0usize..40, c in 0usize..40) {
                let g = GridSpec::new(rows, cols, d, CellIndex::new(ar % rows, ac % cols)).unwrap();
                let cell = CellIndex::new(r % rows, c % cols);
                let p = g.cell_to_world(cell).unwrap();
                prop_assert_eq!(g.world_to_cell(p), Some(cell));
            }

            #[test]
            fn step_is_total(r in 0usize..9, c in 0usize..9, a in 0usize..9) {
                let g = GridSpec::new(9, 9, 1.0, CellIndex::new(4, 4)).unwrap();
                let cell = CellIndex::new(r, c);
                if let Some(next) = g.step(cell, Action::from_index(a).unwrap()) {
                    prop_assert!(next.row < 9 && next.col < 9);
                    prop_assert!(next.chebyshev(cell) <= 1);
                }
            }

            #[test]
            fn quantized_paths_are_adjacent(pts in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..30)) {
                let g = GridSpec::new(64, 64, 1.0, CellIndex::new(32, 32)).unwrap();
                let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
                let q = g.quantize_trajectory(&pts).unwrap();
                prop_assert_eq!(q.per_step.len(), pts.len());
                for w in q.path.windows(2) {
                    prop_assert!(w[0].chebyshev(w[1]) == 1);
                }
            }
        }
    }
}
