//! Randomized self-checks of the structural laws of `S(J, r, mu)`.
//!
//! The maximin recursion behind the backward-propagation oracle satisfies a
//! family of monotonicity laws that the correctness proofs lean on:
//!
//! 1. non-increasing in the inflow `mu` (when the requirement stays
//!    feasible, `sum r <= mu`);
//! 2. non-increasing in the requirement vector `r`;
//! 3. non-decreasing in capacities (a wider network is harder to break);
//! 4. non-decreasing in the link set (extra links with zero requirement
//!    never hurt);
//! 5. dead-link removal: links whose subtree is already worthless at their
//!    requirement (`S_e(r_e) = 0`) can be deleted without changing `S`,
//!    provided the split problem is feasible at all;
//! 6. the split bound: for the maximin split `x` and any subset `K` of
//!    links, breaking the `K`-subtrees at their current flows and then the
//!    rest (now required to keep `x`) costs at least `S`.
//!
//! [`check_s_properties`] samples random nodes, subsets, requirements and
//! inflows (subset size capped at three, the exact-solve regime) and asserts
//! each law within a grid tolerance proportional to total capacity. Failures
//! carry the seed and trial index, so any report line can be replayed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{LinkIx, NodeId};
use crate::resilience::bpa::ResilienceOracle;
use crate::resilience::ResilienceError;

/// One violated assertion, with enough context to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyFailure {
    pub property: String,
    pub node: NodeId,
    pub seed: u64,
    pub trial: usize,
    pub detail: String,
}

/// Outcome of a property run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub seed: u64,
    /// Number of individual assertions evaluated (not just trials).
    pub assertions: u64,
    pub tolerance: f64,
    pub failures: Vec<PropertyFailure>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `trials` randomized rounds of the six laws against `oracle`.
///
/// The tolerance scales with total capacity because every value is computed
/// on capacity-proportional grids. One capacity-inflated sibling oracle is
/// built up front for the capacity-monotonicity law.
pub fn check_s_properties(
    oracle: &ResilienceOracle,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport, ResilienceError> {
    let net = oracle.net();
    let tol = 1e-3 * (1.0 + net.total_capacity());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Sibling network with every capacity scaled up, for law 3.
    let factor: Vec<f64> = (0..net.link_count()).map(|_| 1.0 + rng.gen::<f64>()).collect();
    let bumped_caps: Vec<f64> = net
        .links()
        .iter()
        .zip(&factor)
        .map(|(l, f)| l.capacity * f)
        .collect();
    let bumped_net = net.with_capacities(&bumped_caps)?;
    let bumped = ResilienceOracle::build_with_grid(&bumped_net, 400)?;

    let candidates: Vec<NodeId> = (0..net.node_count())
        .filter(|&v| !net.is_destination(v) && !net.out_links(v).is_empty())
        .collect();

    let mut report = PropertyReport {
        trials,
        seed,
        assertions: 0,
        tolerance: tol,
        failures: Vec::new(),
    };

    for trial in 0..trials {
        let v = *candidates.choose(&mut rng).expect("network has a non-destination node");
        let out = net.out_links(v);
        // Random subset of size one to three, in network order.
        let size = rng.gen_range(1..=out.len().min(3));
        let mut subset: Vec<LinkIx> = out.to_vec();
        subset.shuffle(&mut rng);
        subset.truncate(size);
        subset.sort_unstable();
        let caps: Vec<f64> = subset.iter().map(|&e| net.link(e).capacity).collect();
        let c_sum: f64 = caps.iter().sum();

        // Requirement: zero half the time, otherwise moderate random.
        let r1: Vec<f64> = if rng.gen_bool(0.5) {
            vec![0.0; size]
        } else {
            caps.iter().map(|&c| rng.gen::<f64>() * 0.5 * c).collect()
        };
        let r_sum: f64 = r1.iter().sum();
        let r2: Vec<f64> = r1.iter().map(|&x| x * rng.gen::<f64>()).collect();
        // Inflows with sum(r) <= mu2 <= mu1 so law 1's precondition holds.
        let mu1 = r_sum + rng.gen::<f64>() * (1.2 * c_sum - r_sum).max(0.0);
        let mu2 = r_sum + rng.gen::<f64>() * (mu1 - r_sum);

        let mut check = |property: &str, lhs: f64, rhs: f64, detail: String| {
            report.assertions += 1;
            if lhs > rhs + tol {
                report.failures.push(PropertyFailure {
                    property: property.to_string(),
                    node: v,
                    seed,
                    trial,
                    detail: format!("{detail}: {lhs} > {rhs} + {tol}"),
                });
            }
        };

        let s_r1_mu1 = oracle.s_value(v, &subset, &r1, mu1);

        // 1. Non-increasing in mu.
        let s_r1_mu2 = oracle.s_value(v, &subset, &r1, mu2);
        check("mu-monotone", s_r1_mu1, s_r1_mu2, format!("S({subset:?},r1,{mu1}) vs mu {mu2}"));

        // 2. Non-increasing in r.
        let s_r2_mu1 = oracle.s_value(v, &subset, &r2, mu1);
        check("r-monotone", s_r1_mu1, s_r2_mu1, format!("S({subset:?},{r1:?},{mu1}) vs {r2:?}"));

        // 3. Non-decreasing in capacities (compare against the inflated twin).
        let s_bumped = bumped.s_value(v, &subset, &r1, mu1);
        check("capacity-monotone", s_r1_mu1, s_bumped, format!("S({subset:?},r1,{mu1}) vs bumped"));

        // 4. Non-decreasing in the link set: a proper subset with the same
        // requirements (zeros elsewhere) is never harder to break.
        if size >= 2 {
            let keep = rng.gen_range(1..size);
            let mut idx: Vec<usize> = (0..size).collect();
            idx.shuffle(&mut rng);
            idx.truncate(keep);
            idx.sort_unstable();
            let sub_links: Vec<LinkIx> = idx.iter().map(|&i| subset[i]).collect();
            let sub_r: Vec<f64> = idx.iter().map(|&i| r1[i]).collect();
            let sub_r_sum: f64 = sub_r.iter().sum();
            if sub_r_sum <= mu1 {
                let mut r_zeroed = vec![0.0; size];
                for &i in &idx {
                    r_zeroed[i] = r1[i];
                }
                let small = oracle.s_value(v, &sub_links, &sub_r, mu1);
                let big = oracle.s_value(v, &subset, &r_zeroed, mu1);
                check(
                    "set-monotone",
                    small,
                    big,
                    format!("S({sub_links:?}) vs S({subset:?}) at mu {mu1}"),
                );
            }
        }

        // 5. Dead-link removal, on feasible instances only.
        if r_sum <= mu1 && mu1 <= c_sum {
            let live: Vec<usize> = (0..size)
                .filter(|&i| oracle.link_fn(subset[i]).eval(r1[i]) > 0.0)
                .collect();
            let live_links: Vec<LinkIx> = live.iter().map(|&i| subset[i]).collect();
            let live_r: Vec<f64> = live.iter().map(|&i| r1[i]).collect();
            let trimmed = oracle.s_value(v, &live_links, &live_r, mu1);
            check(
                "dead-link-removal-le",
                s_r1_mu1,
                trimmed,
                format!("S({subset:?}) vs live {live_links:?} at mu {mu1}"),
            );
            check(
                "dead-link-removal-ge",
                trimmed,
                s_r1_mu1,
                format!("S(live {live_links:?}) vs S({subset:?}) at mu {mu1}"),
            );
        }

        // 6. Split bound: breaking K at the current split and the remainder
        // at requirement x costs at least S.
        if let Ok(x) = oracle.g_split(v, &subset, &r1, mu1) {
            let cut = rng.gen_range(1..=size);
            let mut idx: Vec<usize> = (0..size).collect();
            idx.shuffle(&mut rng);
            let (killed, rest): (Vec<usize>, Vec<usize>) = {
                let mut k: Vec<usize> = idx.drain(..cut).collect();
                k.sort_unstable();
                idx.sort_unstable();
                (k, idx)
            };
            let kill_cost: f64 = killed
                .iter()
                .map(|&i| oracle.link_fn(subset[i]).eval(x[i]))
                .sum();
            let rest_links: Vec<LinkIx> = rest.iter().map(|&i| subset[i]).collect();
            let rest_r: Vec<f64> = rest.iter().map(|&i| x[i]).collect();
            let rest_value = if rest_links.is_empty() {
                0.0
            } else {
                oracle.s_value(v, &rest_links, &rest_r, mu1)
            };
            check(
                "split-bound",
                s_r1_mu1,
                kill_cost + rest_value,
                format!("S({subset:?},{r1:?},{mu1}) vs kill {killed:?} of {x:?}"),
            );
        }
    }

    Ok(report)
}
