//! Backward-propagation resilience oracle.
//!
//! Working from the destinations back toward the origin, the oracle attaches
//! to every link `e` a one-dimensional *link resilience function* `S_e(mu)`:
//! the cheapest total capacity reduction that stops a flow of `mu` entering
//! `e` from reaching the destinations through `e`'s subtree. It is the
//! pointwise minimum of the link's own residual `max(C_e - mu, 0)` and the
//! *node curve* of the link's head.
//!
//! The node curve solves a local maximin problem. For a node `v` with active
//! outgoing links `J`, per-link lower requirements `r`, and inflow `mu`, an
//! adversary must disconnect every outgoing subtree; it picks the cheapest
//! order, paying `S_e(x_e)` for the first victim and then facing the same
//! problem on `J` without `e`, where the full `mu` must still be routed and
//! — because surviving shares may only grow — the current split `x` becomes
//! the new requirement vector. The router counters by choosing `x`:
//!
//! ```text
//! S(J, r, mu) = max over splits x (sum x = mu, r <= x <= C)
//!               of min over e in J of [ S_e(x_e) + S(J \ {e}, x, mu) ]
//! ```
//!
//! with `S(empty set) = 0` and value `0` when no feasible split exists. The
//! node curve is `mu -> S(all outgoing links, 0, mu)`; evaluated at the
//! origin with the external inflow it is the margin of resilience the best
//! locally-informed routing can guarantee, and the maximizing splits induce
//! that routing policy ([`BpaPolicy`]).
//!
//! Two-link problems are solved exactly by bisection on the crossing of one
//! decreasing and one increasing piecewise-linear curve (a singleton tail
//! does not depend on the split, so the recursion bottoms out cleanly).
//! Three-link problems sweep a grid over the split simplex, evaluating each
//! pair tail exactly: a pair problem is unimodal, so constraining it below
//! by the current split just clamps its unconstrained maximizer. Four links
//! and up fall back to constant tails evaluated at the requirement `r` — an
//! upper relaxation — on coarser grids; any such solve trips the flag behind
//! [`ResilienceOracle::used_coarse_grid`], matching the warranty that
//! optimality claims need out-degree at most three.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use crate::network::{FlowNetwork, LinkIx, NodeId};
use crate::resilience::pwl::{sample_grid, PwlFunction};
use crate::resilience::ResilienceError;

/// Sampling resolution for node curves: number of grid intervals over the
/// curve's natural domain (plus exact kink candidates).
pub const DEFAULT_CURVE_GRID: usize = 400;

/// Relative slack used in feasibility comparisons.
fn eps_for(x: f64) -> f64 {
    1e-9 * (1.0 + x.abs())
}

/// Requested accuracy for a maximin solve. Direct queries use fine grids;
/// curve sampling uses coarser ones since the curve is interpolated anyway.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quality {
    Direct,
    Curve,
}

impl Quality {
    /// Grid step as a fraction of the subset's total capacity, by arity.
    fn steps(self, arity: usize) -> usize {
        match (self, arity) {
            (Quality::Direct, 3) => 200,
            (Quality::Direct, 4) => 24,
            (Quality::Direct, 5) => 12,
            (Quality::Direct, _) => 8,
            (Quality::Curve, 3) => 48,
            (Quality::Curve, 4) => 16,
            (Quality::Curve, 5) => 10,
            (Quality::Curve, _) => 6,
        }
    }
}

type MemoKey = (NodeId, u32, i64, Vec<i64>);

fn quantize(x: f64) -> i64 {
    (x / 1e-7).round() as i64
}

/// Per-network resilience data produced by backward propagation.
pub struct ResilienceOracle {
    net: FlowNetwork,
    curve_grid: usize,
    link_fns: Vec<PwlFunction>,
    node_curves: Vec<Option<PwlFunction>>,
    gammas: Vec<f64>,
    used_coarse: AtomicBool,
    memo: Mutex<HashMap<MemoKey, (f64, Vec<f64>)>>,
}

impl std::fmt::Debug for ResilienceOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResilienceOracle")
            .field("links", &self.net.link_count())
            .field("curve_grid", &self.curve_grid)
            .finish()
    }
}

impl ResilienceOracle {
    /// Runs the backward propagation over the whole network with the default
    /// curve resolution.
    pub fn build(net: &FlowNetwork) -> Result<Self, ResilienceError> {
        Self::build_with_grid(net, DEFAULT_CURVE_GRID)
    }

    /// Runs the backward propagation with an explicit curve resolution.
    pub fn build_with_grid(net: &FlowNetwork, curve_grid: usize) -> Result<Self, ResilienceError> {
        let curve_grid = curve_grid.max(10);
        let mut oracle = Self {
            net: net.clone(),
            curve_grid,
            link_fns: vec![PwlFunction::constant(0.0); net.link_count()],
            node_curves: vec![None; net.node_count()],
            gammas: vec![0.0; net.link_count()],
            used_coarse: AtomicBool::new(false),
            memo: Mutex::new(HashMap::new()),
        };
        let order: Vec<NodeId> = net.topo_order().iter().rev().copied().collect();
        for v in order {
            if net.is_destination(v) {
                continue;
            }
            for &e in net.out_links(v) {
                let link = net.link(e);
                let own = PwlFunction::clamped_line(link.capacity);
                oracle.link_fns[e] = match &oracle.node_curves[link.head] {
                    None => own, // destination head: only the link itself can fail
                    Some(curve) => own.min_with(curve),
                };
                oracle.gammas[e] = oracle.link_fns[e].sup_positive();
            }
            oracle.node_curves[v] = Some(oracle.sample_node_curve(v));
        }
        Ok(oracle)
    }

    pub fn net(&self) -> &FlowNetwork {
        &self.net
    }

    /// Resilience of the subtree entered through `e`, as a function of the
    /// flow carried by `e`.
    pub fn link_fn(&self, e: LinkIx) -> &PwlFunction {
        &self.link_fns[e]
    }

    /// Largest flow at which the subtree through `e` still has positive
    /// resilience.
    pub fn gamma(&self, e: LinkIx) -> f64 {
        self.gammas[e]
    }

    /// Node curve `mu -> S(out-links, 0, mu)`; `None` for destinations,
    /// whose curve is conceptually infinite.
    pub fn node_curve(&self, v: NodeId) -> Option<&PwlFunction> {
        self.node_curves[v].as_ref()
    }

    /// True when some solve fell back to the coarse high-arity grid
    /// (node out-degree four or more), so values carry extra grid error.
    pub fn used_coarse_grid(&self) -> bool {
        self.used_coarse.load(Ordering::Relaxed)
    }

    /// Maximin resilience value `S(subset, r, mu)` at node `v`. Returns 0
    /// when no feasible split exists.
    pub fn s_value(&self, v: NodeId, subset: &[LinkIx], r: &[f64], mu: f64) -> f64 {
        self.solve(v, subset, r, mu, Quality::Direct).0
    }

    /// Maximizing split for `S(subset, r, mu)`, lexicographically smallest
    /// among grid-optimal ties. Errors when no split satisfies the bounds.
    pub fn g_split(
        &self,
        v: NodeId,
        subset: &[LinkIx],
        r: &[f64],
        mu: f64,
    ) -> Result<Vec<f64>, ResilienceError> {
        let (_, split) = self.solve(v, subset, r, mu, Quality::Direct);
        split.ok_or_else(|| ResilienceError::InfeasibleSplit {
            node: v,
            mu,
            min_total: r.iter().sum(),
            max_total: subset.iter().map(|&e| self.net.link(e).capacity).sum(),
        })
    }

    /// Margin of resilience guaranteed by the induced policy: the origin's
    /// maximin value at the external inflow, solved directly (no curve
    /// interpolation at the queried inflow).
    pub fn s_star(&self, lambda: f64) -> f64 {
        let out: Vec<LinkIx> = self.net.out_links(0).to_vec();
        let r = vec![0.0; out.len()];
        self.s_value(0, &out, &r, lambda)
    }

    /// Origin split realizing [`Self::s_star`].
    pub fn origin_split(&self, lambda: f64) -> Result<Vec<f64>, ResilienceError> {
        let out: Vec<LinkIx> = self.net.out_links(0).to_vec();
        let r = vec![0.0; out.len()];
        self.g_split(0, &out, &r, lambda)
    }

    /// Samples the node curve for `v` over `[0, total outgoing capacity]`,
    /// enriching the grid with exact kink candidates from the child link
    /// functions.
    fn sample_node_curve(&self, v: NodeId) -> PwlFunction {
        let out = self.net.out_links(v);
        if out.len() == 1 {
            return self.link_fns[out[0]].clone();
        }
        let total: f64 = out.iter().map(|&e| self.net.link(e).capacity).sum();
        let mut xs = sample_grid(0.0, total, self.curve_grid);
        let mut kinks: Vec<f64> = Vec::new();
        for &e in out {
            kinks.push(self.net.link(e).capacity);
            if self.gammas[e].is_finite() {
                kinks.push(self.gammas[e]);
            }
            for &(x, _) in self.link_fns[e].points() {
                kinks.push(x);
            }
        }
        // Pairwise sums catch kinks of two-term maximin combinations, e.g.
        // the capacity-sum breakpoints of two-link node curves.
        let singles = kinks.clone();
        for (i, &a) in singles.iter().enumerate() {
            for &b in &singles[i..] {
                kinks.push(a + b);
            }
        }
        xs.extend(kinks.into_iter().filter(|x| *x > 0.0 && *x < total));
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));

        let r = vec![0.0; out.len()];
        let points: Vec<(f64, f64)> = xs
            .into_iter()
            .map(|mu| (mu, self.solve(v, out, &r, mu, Quality::Curve).0))
            .collect();
        let mut curve = PwlFunction::from_points(points).expect("sorted sample grid");
        curve.prune(1e-9);
        curve
    }

    /// Full subset-recursion solve: returns the maximin value and, when the
    /// split problem is feasible, the maximizing split.
    fn solve(
        &self,
        v: NodeId,
        subset: &[LinkIx],
        r: &[f64],
        mu: f64,
        quality: Quality,
    ) -> (f64, Option<Vec<f64>>) {
        let g = subset.len();
        assert!(g <= 16, "maximin subset recursion limited to 16 links");
        assert_eq!(r.len(), g, "requirement vector must align with the subset");
        if g == 0 {
            return (0.0, if mu.abs() <= eps_for(0.0) { Some(vec![]) } else { None });
        }
        let caps: Vec<f64> = subset.iter().map(|&e| self.net.link(e).capacity).collect();
        let fns: Vec<&PwlFunction> = subset.iter().map(|&e| &self.link_fns[e]).collect();

        // Subset values over local bitmasks, ascending (submasks first).
        let full = (1u32 << g) - 1;
        let mut values = vec![0.0f64; 1 << g];
        let mut full_split: Option<Vec<f64>> = None;
        for mask in 1..=full {
            let want_split = mask == full;
            let (value, split) =
                self.solve_mask(v, subset, &caps, &fns, r, mu, mask, &values, quality, want_split);
            values[mask as usize] = value;
            if want_split {
                full_split = split;
            }
        }
        (values[full as usize], full_split)
    }

    /// Solves one subset (given the values of its sub-subsets) and optionally
    /// reports the maximizing split, padded to the local index space.
    #[allow(clippy::too_many_arguments)]
    fn solve_mask(
        &self,
        v: NodeId,
        subset: &[LinkIx],
        caps: &[f64],
        fns: &[&PwlFunction],
        r: &[f64],
        mu: f64,
        mask: u32,
        values: &[f64],
        quality: Quality,
        want_split: bool,
    ) -> (f64, Option<Vec<f64>>) {
        let members: Vec<usize> = (0..subset.len()).filter(|i| mask >> i & 1 == 1).collect();
        let k = members.len();
        let r_sum: f64 = members.iter().map(|&i| r[i]).sum();
        let c_sum: f64 = members.iter().map(|&i| caps[i]).sum();
        if mu < r_sum - eps_for(mu) || mu > c_sum + eps_for(mu) {
            return (0.0, None);
        }
        // Constant tail values S(mask \ {i}) for each member.
        let tails: Vec<f64> = members
            .iter()
            .map(|&i| values[(mask & !(1 << i)) as usize])
            .collect();

        // Splits are reported in mask-member order; for the full mask this is
        // exactly the subset order the caller passed in.
        match k {
            1 => {
                let i = members[0];
                let value = fns[i].eval(mu);
                (value, want_split.then(|| vec![mu]))
            }
            2 => {
                let (i, j) = (members[0], members[1]);
                // x_i = y, x_j = mu - y.
                let lo = r[i].max(mu - caps[j]);
                let hi = caps[i].min(mu - r[j]);
                if lo > hi + eps_for(mu) {
                    return (0.0, None);
                }
                let hi = hi.max(lo);
                let a = |y: f64| fns[i].eval(y) + tails[0]; // kill i first
                let b = |y: f64| fns[j].eval(mu - y) + tails[1]; // kill j first
                let (value, y) = maximin_cross(a, b, lo, hi);
                (value, want_split.then(|| vec![y, mu - y]))
            }
            3 => {
                let key: MemoKey = (
                    v,
                    mask,
                    quantize(mu),
                    members.iter().map(|&i| quantize(r[i])).collect(),
                );
                if quality == Quality::Direct {
                    if let Some((value, split)) = self.memo.lock().unwrap().get(&key) {
                        return (*value, want_split.then(|| split.clone()));
                    }
                }
                let lows: Vec<f64> = members.iter().map(|&i| r[i]).collect();
                let highs: Vec<f64> = members.iter().map(|&i| caps[i]).collect();
                let local_fns: [&PwlFunction; 3] =
                    [fns[members[0]], fns[members[1]], fns[members[2]]];
                let local_caps = [caps[members[0]], caps[members[1]], caps[members[2]]];
                let (value, split) = triple_maximin(
                    &local_fns,
                    &local_caps,
                    &lows,
                    &highs,
                    mu,
                    c_sum,
                    quality.steps(3),
                );
                if quality == Quality::Direct {
                    self.memo.lock().unwrap().insert(key, (value, split.clone()));
                }
                (value, want_split.then_some(split))
            }
            _ => {
                let key: MemoKey = (
                    v,
                    mask,
                    quantize(mu),
                    members.iter().map(|&i| quantize(r[i])).collect(),
                );
                if quality == Quality::Direct {
                    if let Some((value, split)) = self.memo.lock().unwrap().get(&key) {
                        return (*value, want_split.then(|| split.clone()));
                    }
                }
                // Four links and up: constant tails at the requirement `r`
                // (an upper relaxation of the split-requirement recursion)
                // on a coarse grid. Flag the oracle accordingly.
                self.used_coarse.store(true, Ordering::Relaxed);
                let lows: Vec<f64> = members.iter().map(|&i| r[i]).collect();
                let highs: Vec<f64> = members.iter().map(|&i| caps[i]).collect();
                let local_fns: Vec<&PwlFunction> = members.iter().map(|&i| fns[i]).collect();
                let (value, split) = grid_maximin(
                    &local_fns,
                    &tails,
                    &lows,
                    &highs,
                    mu,
                    c_sum,
                    quality.steps(k),
                );
                if quality == Quality::Direct {
                    self.memo.lock().unwrap().insert(key, (value, split.clone()));
                }
                (value, want_split.then_some(split))
            }
        }
    }
}

/// Exact-tail maximin for a three-link set. Each of the three min-terms
/// pairs a link's own curve with the value of the two survivors' pair
/// problem, constrained below by the current split (shares never shrink).
/// The pair problem is unimodal in its one degree of freedom, so the
/// constrained value is its crossing point clamped into the query interval.
fn triple_maximin(
    fns: &[&PwlFunction; 3],
    caps: &[f64; 3],
    lows: &[f64],
    highs: &[f64],
    mu: f64,
    c_sum: f64,
    steps: usize,
) -> (f64, Vec<f64>) {
    // Singleton values at full inflow: after both its siblings die, a link
    // carries everything. (Zero beyond its capacity via the clamp in S_e.)
    let singles = [fns[0].eval(mu), fns[1].eval(mu), fns[2].eval(mu)];

    // Base solve for the pair (j, k), j < k in local order, parameterized by
    // y = share of j, over the widest interval the requirement allows.
    struct PairBase {
        lo: f64,
        hi: f64,
        y_star: f64,
        feasible: bool,
    }
    let pair_phi = |j: usize, k: usize, y: f64| -> f64 {
        (fns[j].eval(y) + singles[k]).min(fns[k].eval(mu - y) + singles[j])
    };
    let pair_base = |j: usize, k: usize| -> PairBase {
        let lo = lows[j].max(mu - caps[k]);
        let hi = caps[j].min(mu - lows[k]);
        if lo > hi + eps_for(mu) {
            return PairBase { lo, hi, y_star: lo, feasible: false };
        }
        let hi = hi.max(lo);
        let (_, y_star) = maximin_cross(
            |y| fns[j].eval(y) + singles[k],
            |y| fns[k].eval(mu - y) + singles[j],
            lo,
            hi,
        );
        PairBase { lo, hi, y_star, feasible: true }
    };
    // bases[excluded] is the pair problem of the other two members.
    let bases = [pair_base(1, 2), pair_base(0, 2), pair_base(0, 1)];
    let pair_value = |excluded: usize, xj: f64, xk: f64| -> f64 {
        let (j, k) = match excluded {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let base = &bases[excluded];
        if !base.feasible {
            return 0.0;
        }
        let lo = base.lo.max(xj);
        let hi = base.hi.min(mu - xk);
        if lo > hi + eps_for(mu) {
            return 0.0;
        }
        pair_phi(j, k, base.y_star.clamp(lo, hi.max(lo)))
    };

    let eval = |x: &[f64]| -> f64 {
        let t0 = fns[0].eval(x[0]) + pair_value(0, x[1], x[2]);
        let t1 = fns[1].eval(x[1]) + pair_value(1, x[0], x[2]);
        let t2 = fns[2].eval(x[2]) + pair_value(2, x[0], x[1]);
        t0.min(t1).min(t2)
    };
    grid_maximin_with(&eval, lows, highs, mu, c_sum, steps)
}

/// Maximizes `min(a, b)` over `[lo, hi]` where `a` is non-increasing and `b`
/// is non-decreasing. Returns the value and the smallest maximizing point.
fn maximin_cross(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let at = |y: f64| a(y).min(b(y));
    if hi - lo <= 0.0 {
        return (at(lo), lo);
    }
    let (mut best_y, mut best_v);
    if a(lo) <= b(lo) {
        // `a` already limits at the left end; it only decreases rightward.
        (best_y, best_v) = (lo, at(lo));
    } else if b(hi) <= a(hi) {
        (best_y, best_v) = (hi, at(hi));
    } else {
        // Crossing inside: bisect on a - b.
        let (mut l, mut h) = (lo, hi);
        for _ in 0..80 {
            let m = 0.5 * (l + h);
            if a(m) - b(m) > 0.0 {
                l = m;
            } else {
                h = m;
            }
        }
        let candidates = [l, h, 0.5 * (l + h)];
        (best_y, best_v) = (l, at(l));
        for &y in &candidates[1..] {
            let val = at(y);
            if val > best_v + 1e-15 {
                (best_y, best_v) = (y, val);
            }
        }
    }
    // The optimal set is an interval; slide to its left end for a
    // deterministic (lexicographically smallest) report.
    let tol = 1e-12 * (1.0 + best_v.abs());
    if best_y > lo && at(lo) >= best_v - tol {
        return (best_v.max(at(lo)), lo);
    }
    if best_y > lo {
        let (mut l, mut h) = (lo, best_y);
        for _ in 0..60 {
            let m = 0.5 * (l + h);
            if at(m) >= best_v - tol {
                h = m;
            } else {
                l = m;
            }
        }
        best_y = h;
    }
    (best_v, best_y)
}

/// Grid search over the simplex `{x : sum x = mu, lo <= x <= hi}` maximizing
/// `min_i (fns[i](x_i) + tails[i])` with constant tails.
fn grid_maximin(
    fns: &[&PwlFunction],
    tails: &[f64],
    lows: &[f64],
    highs: &[f64],
    mu: f64,
    c_sum: f64,
    steps: usize,
) -> (f64, Vec<f64>) {
    let k = fns.len();
    let eval = |x: &[f64]| -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..k {
            m = m.min(fns[i].eval(x[i]) + tails[i]);
        }
        m
    };
    grid_maximin_with(&eval, lows, highs, mu, c_sum, steps)
}

/// Grid search over the simplex `{x : sum x = mu, lo <= x <= hi}` maximizing
/// an arbitrary objective, with two local refinement rounds. Ties prefer
/// lexicographically smaller splits.
fn grid_maximin_with(
    eval: &dyn Fn(&[f64]) -> f64,
    lows: &[f64],
    highs: &[f64],
    mu: f64,
    c_sum: f64,
    steps: usize,
) -> (f64, Vec<f64>) {
    let k = lows.len();
    let lex_less = |a: &[f64], b: &[f64]| -> bool {
        for i in 0..k {
            if a[i] < b[i] - 1e-12 {
                return true;
            }
            if a[i] > b[i] + 1e-12 {
                return false;
            }
        }
        false
    };

    let mut best_x: Option<Vec<f64>> = None;
    let mut best_v = f64::NEG_INFINITY;
    let consider = |x: &[f64], v: f64, best_x: &mut Option<Vec<f64>>, best_v: &mut f64| {
        let tie = 1e-12 * (1.0 + best_v.abs());
        if v > *best_v + tie
            || (v >= *best_v - tie && best_x.as_ref().map_or(true, |b| lex_less(x, b)))
        {
            *best_v = v.max(*best_v);
            *best_x = Some(x.to_vec());
        }
    };

    // Recursive sweep over the first k-1 coordinates; the last is implied.
    fn sweep(
        i: usize,
        x: &mut Vec<f64>,
        remaining: f64,
        h: f64,
        lows: &[f64],
        highs: &[f64],
        centers: Option<&[f64]>,
        window: f64,
        mu: f64,
        eval: &dyn Fn(&[f64]) -> f64,
        visit: &mut dyn FnMut(&[f64], f64),
    ) {
        let k = lows.len();
        if i == k - 1 {
            let last = remaining;
            if last >= lows[k - 1] - eps_for(mu) && last <= highs[k - 1] + eps_for(mu) {
                x.push(last.clamp(lows[k - 1], highs[k - 1]));
                let v = eval(x);
                visit(x, v);
                x.pop();
            }
            return;
        }
        let (mut lo, mut hi) = (lows[i], highs[i].min(remaining));
        if let Some(c) = centers {
            lo = lo.max(c[i] - window);
            hi = hi.min(c[i] + window);
        }
        if hi < lo {
            return;
        }
        let n = if h > 0.0 { ((hi - lo) / h).ceil() as usize + 1 } else { 1 };
        for s in 0..=n {
            let y = if n == 0 { lo } else { lo + (hi - lo) * s as f64 / n as f64 };
            x.push(y);
            sweep(i + 1, x, remaining - y, h, lows, highs, centers, window, mu, eval, visit);
            x.pop();
        }
    }

    let h0 = (c_sum / steps as f64).max(1e-9);
    let mut x = Vec::with_capacity(k);
    sweep(
        0,
        &mut x,
        mu,
        h0,
        lows,
        highs,
        None,
        0.0,
        mu,
        &eval,
        &mut |x, v| consider(x, v, &mut best_x, &mut best_v),
    );
    if best_x.is_none() {
        // Feasibility was checked by the caller; numerical corner cases can
        // still leave the sweep empty. Fall back to the clamped proportional
        // point.
        let scale = if c_sum > 0.0 { mu / c_sum } else { 0.0 };
        let xf: Vec<f64> = highs.iter().map(|&c| c * scale).collect();
        return (eval(&xf), xf);
    }

    // Two refinement rounds around the incumbent.
    let mut h = h0;
    for _ in 0..2 {
        let centers = best_x.clone().unwrap();
        let window = h;
        h /= 10.0;
        let mut x = Vec::with_capacity(k);
        sweep(
            0,
            &mut x,
            mu,
            h,
            lows,
            highs,
            Some(&centers),
            window,
            mu,
            &eval,
            &mut |x, v| consider(x, v, &mut best_x, &mut best_v),
        );
    }
    (best_v, best_x.unwrap())
}

/// Routing policy induced by the oracle: at inflow `mu` the full-set split is
/// the maximin optimizer `r* = g(out-links, 0, mu)`; after links are lost the
/// node re-optimizes over the survivors while never dropping below `r*`,
/// which keeps surviving flows monotone. When the surviving capacity cannot
/// carry `mu` at all, the policy degrades to a capacity-proportional
/// overload (every link exceeds capacity and the node is lost regardless).
#[derive(Debug)]
pub struct BpaPolicy {
    oracle: ResilienceOracle,
}

impl BpaPolicy {
    pub fn new(oracle: ResilienceOracle) -> Self {
        Self { oracle }
    }

    pub fn oracle(&self) -> &ResilienceOracle {
        &self.oracle
    }

    fn proportional(&self, active: &[LinkIx], mu: f64) -> Vec<f64> {
        let caps: Vec<f64> = active.iter().map(|&e| self.oracle.net.link(e).capacity).collect();
        let total: f64 = caps.iter().sum();
        if total <= 0.0 {
            return vec![0.0; active.len()];
        }
        caps.iter().map(|&c| c * mu / total).collect()
    }

    /// Splits `mu` over the active subset of `v`'s outgoing links.
    pub fn split(&self, v: NodeId, active: &[LinkIx], mu: f64) -> Vec<f64> {
        let full = self.oracle.net.out_links(v);
        let zeros = vec![0.0; full.len()];
        let full_split = match self.oracle.g_split(v, full, &zeros, mu) {
            Ok(s) => s,
            Err(_) => return self.proportional(active, mu),
        };
        if active.len() == full.len() {
            return full_split;
        }
        // Restrict the full-set optimizer to the survivors as requirements.
        let r: Vec<f64> = active
            .iter()
            .map(|&e| {
                let pos = full.iter().position(|&f| f == e).expect("active subset of out-links");
                full_split[pos]
            })
            .collect();
        match self.oracle.g_split(v, active, &r, mu) {
            Ok(s) => s,
            Err(_) => self.proportional(active, mu),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilience::closed_form;
    use crate::testnet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_link_matches_closed_form_at_key_points() {
        let net = testnet::two_link(10.0, 14.0);
        let oracle = ResilienceOracle::build(&net).unwrap();
        assert_abs_diff_eq!(oracle.s_star(4.0), 18.0, epsilon = 1e-9);
        assert_abs_diff_eq!(oracle.s_star(12.0), 7.0, epsilon = 1e-9);
        let split = oracle.origin_split(12.0).unwrap();
        assert_abs_diff_eq!(split[0], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(split[1], 7.0, epsilon = 1e-9);
        for i in 0..=100 {
            let lambda = 24.0 * i as f64 / 100.0;
            let want = closed_form::two_link_margin(10.0, 14.0, lambda);
            assert_abs_diff_eq!(oracle.s_star(lambda), want, epsilon = 1e-6);
        }
    }

    #[test]
    fn link_fn_is_residual_for_destination_links() {
        let net = testnet::two_link(3.0, 5.0);
        let oracle = ResilienceOracle::build(&net).unwrap();
        for mu in [0.0, 1.0, 2.9, 3.0, 4.0] {
            assert_abs_diff_eq!(oracle.link_fn(0).eval(mu), (3.0 - mu).max(0.0));
        }
        assert_abs_diff_eq!(oracle.gamma(0), 3.0);
        assert_abs_diff_eq!(oracle.gamma(1), 5.0);
    }

    #[test]
    fn profile_b_margin_and_splits() {
        let net = testnet::example2();
        let oracle = ResilienceOracle::build(&net).unwrap();
        // Bottom of the deep branch: node 4's curve over {e6, e7} with
        // effective link functions [0.6 - x]+ and [1.5 - x]+.
        let c4 = oracle.node_curve(4).unwrap();
        assert_abs_diff_eq!(c4.eval(0.0), 2.1, epsilon = 1e-6);
        assert_abs_diff_eq!(c4.eval(0.6), 1.2, epsilon = 1e-6);
        assert_abs_diff_eq!(c4.eval(1.5), 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(c4.eval(2.1), 0.0, epsilon = 1e-6);
        // Maximin at the origin: the guaranteed margin at inflow 2.
        assert_abs_diff_eq!(oracle.s_star(testnet::EX2_LAMBDA), 0.2995, epsilon = 5e-3);
        // Node 1 split at inflow 1.9 puts 0.4 on the thin link e3.
        let (e3, e4) = (2, 3);
        let split = oracle
            .g_split(1, &[e3, e4], &[0.0, 0.0], 1.9)
            .unwrap();
        assert_abs_diff_eq!(split[0], 0.4, epsilon = 1e-6);
        assert_abs_diff_eq!(split[1], 1.5, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_split_errors_and_policy_falls_back() {
        let net = testnet::two_link(1.0, 2.0);
        let oracle = ResilienceOracle::build(&net).unwrap();
        assert!(matches!(
            oracle.g_split(0, &[0, 1], &[0.0, 0.0], 4.0),
            Err(ResilienceError::InfeasibleSplit { node: 0, .. })
        ));
        assert_eq!(oracle.s_value(0, &[0, 1], &[0.0, 0.0], 4.0), 0.0);
        let policy = BpaPolicy::new(ResilienceOracle::build(&net).unwrap());
        let x = policy.split(0, &[0, 1], 4.5);
        assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn subset_requirements_keep_splits_monotone() {
        let net = testnet::example2();
        let policy = BpaPolicy::new(ResilienceOracle::build(&net).unwrap());
        let full = policy.split(1, &[2, 3], 1.9);
        let only_e4 = policy.split(1, &[3], 1.9);
        assert!(only_e4[0] >= full[1] - 1e-9);
    }

    #[test]
    fn three_way_symmetric_node_splits_evenly() {
        // Three parallel links of equal capacity behave symmetrically:
        // the maximin split at inflow mu is mu/3 each.
        let net = crate::network::FlowNetwork::from_links(vec![
            crate::network::Link::new("a", 0, 1, 2.0),
            crate::network::Link::new("b", 0, 1, 2.0),
            crate::network::Link::new("c", 0, 1, 2.0),
        ])
        .unwrap();
        let oracle = ResilienceOracle::build(&net).unwrap();
        let split = oracle.origin_split(3.0).unwrap();
        for x in &split {
            assert_abs_diff_eq!(*x, 1.0, epsilon = 0.02);
        }
        // Value: adversary kills links one at a time; with an even split the
        // first costs 1, after which two links carry 1.5 each, etc.
        let s = oracle.s_star(3.0);
        assert!(s > 0.0);
    }

    #[test]
    fn three_unequal_parallel_links_hit_the_derived_optimum() {
        // Caps (3, 2, 1), inflow 3. Every singleton carrying the full
        // inflow has zero margin, so pair values reduce to plain two-link
        // maximins: {a,b} -> 1 (at y_a = 2), {a,c} -> 0.5 (at y_a = 2.5),
        // {b,c} -> 0 (both forced to capacity). At split (x_a, x_b, x_c)
        // the three objective terms are
        //   (3 - x_a),  (2 - x_b) + 0.5 [window-limited],  (1 - x_c) + 1,
        // all equal to 1.5 exactly when x = (1.5, 1, 0.5); pushing any
        // term above 1.5 forces the split sum below 3, so the optimum is
        // unique.
        let net = crate::network::FlowNetwork::from_links(vec![
            crate::network::Link::new("a", 0, 1, 3.0),
            crate::network::Link::new("b", 0, 1, 2.0),
            crate::network::Link::new("c", 0, 1, 1.0),
        ])
        .unwrap();
        let oracle = ResilienceOracle::build(&net).unwrap();
        assert_abs_diff_eq!(oracle.s_star(3.0), 1.5, epsilon = 0.01);
        let split = oracle.origin_split(3.0).unwrap();
        assert_abs_diff_eq!(split[0], 1.5, epsilon = 0.03);
        assert_abs_diff_eq!(split[1], 1.0, epsilon = 0.03);
        assert_abs_diff_eq!(split[2], 0.5, epsilon = 0.03);
        // The exact subset recursion agrees here, which pins the same
        // value through an independent solver.
        let central =
            crate::resilience::centralized::CentralizedOracle::build(&net, 3.0).unwrap();
        assert_abs_diff_eq!(central.resilience(), 1.5, epsilon = 1e-6);
    }
}
