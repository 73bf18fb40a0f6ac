//! Closed-form resilience of two parallel origin-destination links.
//!
//! For capacities `c1, c2` (write `m = min`, `M = max`, `T = c1 + c2`) and
//! inflow `lambda`, the maximin margin and its optimal split are piecewise
//! linear in `lambda` with breakpoints at `m`, `M` and `T`. These formulas
//! serve as an independent oracle for the backward-propagation solver.

/// Maximin margin of resilience for two parallel links.
pub fn two_link_margin(c1: f64, c2: f64, lambda: f64) -> f64 {
    let m = c1.min(c2);
    let big = c1.max(c2);
    let t = c1 + c2;
    if lambda < 0.0 || lambda >= t {
        return 0.0;
    }
    if lambda <= m {
        t - 1.5 * lambda
    } else if lambda <= big {
        0.5 * m + big - lambda
    } else {
        0.5 * t - 0.5 * lambda
    }
}

/// Optimal flow on the first link (the second carries the rest). Valid for
/// `0 <= lambda <= c1 + c2`.
pub fn two_link_split(c1: f64, c2: f64, lambda: f64) -> (f64, f64) {
    let m = c1.min(c2);
    let big = c1.max(c2);
    let t = c1 + c2;
    let x1 = if lambda <= m {
        0.5 * lambda
    } else if lambda <= big {
        // The smaller link pins at half its capacity; the larger one absorbs
        // the rest.
        if c1 > c2 {
            0.5 * c1 + (lambda - 0.5 * t)
        } else {
            0.5 * c1
        }
    } else {
        0.5 * lambda + 0.5 * (c1 - c2)
    };
    (x1, lambda - x1)
}
