//! Continuous piecewise-linear functions on `[0, +inf)`.
//!
//! The resilience computations manipulate one-dimensional curves throughout:
//! per-link residual-capacity profiles of the form `max(C - mu, 0)` and the
//! node curves produced by backward propagation. All of them are continuous,
//! non-negative and piecewise linear, so a sorted breakpoint list is an exact
//! representation. Evaluation is constant before the first breakpoint and
//! after the last one, which matches the curves we build: they always carry an
//! explicit terminal breakpoint where the function has become constant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when constructing a piecewise-linear function from raw
/// breakpoints.
#[derive(Debug, Error, PartialEq)]
pub enum PwlError {
    /// A function needs at least one breakpoint.
    #[error("piecewise-linear function needs at least one breakpoint")]
    Empty,
    /// Breakpoint abscissae must be finite and strictly increasing.
    #[error("breakpoint abscissae must be strictly increasing (x[{index}] = {x})")]
    UnsortedBreakpoints { index: usize, x: f64 },
    /// All coordinates must be finite numbers.
    #[error("non-finite coordinate at breakpoint {index}")]
    NonFinite { index: usize },
}

/// A continuous piecewise-linear function, stored as breakpoints with
/// strictly increasing abscissae. Between breakpoints the function
/// interpolates linearly; outside the breakpoint range it is constant at the
/// nearest endpoint value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlFunction {
    points: Vec<(f64, f64)>,
}

impl PwlFunction {
    /// Builds a function from breakpoints, which must be finite and sorted by
    /// strictly increasing abscissa.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        if points.is_empty() {
            return Err(PwlError::Empty);
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(PwlError::NonFinite { index: i });
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(PwlError::UnsortedBreakpoints { index: i, x });
            }
        }
        Ok(Self { points })
    }

    /// The constant function `x -> y`.
    pub fn constant(y: f64) -> Self {
        Self { points: vec![(0.0, y)] }
    }

    /// The clamped residual line `x -> max(c - x, 0)`, the building block for
    /// single-link resilience curves. For `c <= 0` this is identically zero.
    pub fn clamped_line(c: f64) -> Self {
        if c > 0.0 {
            Self { points: vec![(0.0, c), (c, 0.0)] }
        } else {
            Self::constant(0.0)
        }
    }

    /// Breakpoints, sorted by abscissa.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Largest breakpoint abscissa.
    pub fn max_x(&self) -> f64 {
        self.points.last().unwrap().0
    }

    /// Evaluates the function, extending constantly outside the breakpoint
    /// range.
    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        // partition_point: first index with pts[i].0 > x; the segment of
        // interest is [i-1, i].
        let i = pts.partition_point(|p| p.0 <= x);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Pointwise minimum with another function. Crossing points interior to
    /// segments become breakpoints of the result, so the minimum is exact.
    pub fn min_with(&self, other: &PwlFunction) -> PwlFunction {
        let mut xs: Vec<f64> = self
            .points
            .iter()
            .chain(other.points.iter())
            .map(|p| p.0)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        // Insert a breakpoint wherever the difference changes sign inside an
        // interval; within each refined interval one operand then dominates.
        let mut refined = Vec::with_capacity(xs.len() * 2);
        for w in 0..xs.len() {
            let x0 = xs[w];
            refined.push(x0);
            if w + 1 < xs.len() {
                let x1 = xs[w + 1];
                let d0 = self.eval(x0) - other.eval(x0);
                let d1 = self.eval(x1) - other.eval(x1);
                if (d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0) {
                    let t = d0 / (d0 - d1);
                    let xc = x0 + t * (x1 - x0);
                    if xc > x0 && xc < x1 {
                        refined.push(xc);
                    }
                }
            }
        }
        let points = refined
            .into_iter()
            .map(|x| (x, self.eval(x).min(other.eval(x))))
            .collect();
        let mut out = PwlFunction { points };
        out.prune(1e-12);
        out
    }

    /// Removes breakpoints that are (within a relative tolerance) linear
    /// interpolations of their neighbours, and merges near-duplicate
    /// abscissae. Evaluation changes by at most `rel_tol * (1 + |y|)` at any
    /// point.
    pub fn prune(&mut self, rel_tol: f64) {
        // Merge abscissae that coincide up to rounding, keeping the first.
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        for &(x, y) in &self.points {
            match merged.last() {
                Some(&(px, _)) if x - px <= 1e-12 * (1.0 + x.abs()) => {}
                _ => merged.push((x, y)),
            }
        }
        // Drop interior points lying on the chord of their neighbours.
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(merged.len());
        for &(x, y) in &merged {
            while kept.len() >= 2 {
                let (x0, y0) = kept[kept.len() - 2];
                let (x1, y1) = kept[kept.len() - 1];
                let chord = y0 + (y - y0) * (x1 - x0) / (x - x0);
                if (chord - y1).abs() <= rel_tol * (1.0 + y1.abs()) {
                    kept.pop();
                } else {
                    break;
                }
            }
            kept.push((x, y));
        }
        self.points = kept;
    }

    /// Supremum of the set where the function is strictly positive. Returns
    /// `0.0` when the function is nowhere positive and `+inf` when it stays
    /// positive beyond its last breakpoint.
    pub fn sup_positive(&self) -> f64 {
        let pts = &self.points;
        if pts[pts.len() - 1].1 > 0.0 {
            return f64::INFINITY;
        }
        for i in (0..pts.len()).rev() {
            let (x, y) = pts[i];
            if y > 0.0 {
                // The function is positive at x and zero at the next
                // breakpoint; the zero crossing bounds the positive set.
                let (x1, y1) = pts[i + 1];
                return x + (x1 - x) * y / (y - y1);
            }
        }
        0.0
    }

    /// True when the function never increases by more than `tol` between
    /// consecutive breakpoints.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1 + tol)
    }
}

/// Evenly spaced sample grid over `[lo, hi]` with `steps + 1` points,
/// including both endpoints exactly.
pub fn sample_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 || hi <= lo {
        return vec![lo];
    }
    let mut xs: Vec<f64> = (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect();
    *xs.last_mut().unwrap() = hi;
    xs
}
