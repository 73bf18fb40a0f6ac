//! Exact network resilience under centralized routing.
//!
//! With a centralized router that may re-balance all flows after every
//! disturbance, the cheapest way to stop the network is to remove links one
//! at a time, paying each link's residual capacity at the moment it is hit.
//! The cost of the best such strategy satisfies a recursion over active link
//! sets `J`:
//!
//! ```text
//! S(J) = max over feasible routings x of lambda within J of
//!        min over e in J of  [ C_e - x_e + S(J \ {e}) ]
//! S(J) = 0 when lambda cannot be routed within J at all.
//! ```
//!
//! The inner max-min is an epigraph linear program (maximize `t` subject to
//! `t + x_e <= C_e + S(J \ {e})` and flow conservation), solved for every
//! subset in ascending mask order so all sub-values are already known.
//! `S` of the full link set is the exact margin of resilience of the
//! centralized network, and an upper bound on the margin under any
//! distributed routing policy.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::network::{FlowNetwork, LinkIx};
use crate::resilience::ResilienceError;

/// Hard cap on the number of links: the table has `2^m` entries.
pub const MAX_LINKS: usize = 20;

/// Table of `S(J)` over all subsets `J` of the link set, for one inflow.
#[derive(Debug, Clone)]
pub struct CentralizedOracle {
    lambda: f64,
    /// `values[mask]` is `S` of the subset encoded by `mask` (bit `e` set
    /// means link `e` is present).
    values: Vec<f64>,
}

impl CentralizedOracle {
    /// Solves the recursion for every subset of the network's links.
    pub fn build(net: &FlowNetwork, lambda: f64) -> Result<Self, ResilienceError> {
        net.feasibility_check(lambda)?;
        let m = net.link_count();
        if m > MAX_LINKS {
            return Err(ResilienceError::TooManyLinks { got: m, max: MAX_LINKS });
        }
        let full = (1u32 << m) - 1;
        let mut values = vec![0.0f64; 1 << m];
        for mask in 1..=full {
            values[mask as usize] = solve_mask(net, lambda, mask, &values)?;
            #[cfg(debug_assertions)]
            {
                // One-step subset monotonicity: dropping a link never makes
                // the centralized network harder to break.
                for e in 0..m {
                    if mask >> e & 1 == 1 {
                        let sub = values[(mask & !(1u32 << e)) as usize];
                        debug_assert!(
                            values[mask as usize] >= sub - 1e-6,
                            "S({mask:b}) = {} < S(without {e}) = {sub}",
                            values[mask as usize]
                        );
                    }
                }
            }
        }
        Ok(Self { lambda, values })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `S` of the subset encoded by `mask`.
    pub fn value(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    /// `S` of the full link set: the centralized margin of resilience.
    pub fn resilience(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `S` of `mask` with link `e` removed.
    pub fn value_without(&self, mask: u32, e: LinkIx) -> f64 {
        self.values[(mask & !(1u32 << e)) as usize]
    }

    /// Encodes an activity vector as a subset mask.
    pub fn mask_of(active: &[bool]) -> u32 {
        active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .fold(0u32, |m, (e, _)| m | 1 << e)
    }
}

/// Solves the epigraph linear program for one subset. Infeasible routing
/// means the subset is already broken: `S = 0`.
fn solve_mask(
    net: &FlowNetwork,
    lambda: f64,
    mask: u32,
    values: &[f64],
) -> Result<f64, ResilienceError> {
    let members: Vec<LinkIx> = (0..net.link_count()).filter(|e| mask >> e & 1 == 1).collect();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let mut x: Vec<Option<Variable>> = vec![None; net.link_count()];
    for &e in &members {
        x[e] = Some(problem.add_var(0.0, (0.0, net.link(e).capacity)));
    }
    // t + x_e <= C_e + S(J \ e)
    for &e in &members {
        let sub = values[(mask & !(1u32 << e)) as usize];
        problem.add_constraint(
            &[(t, 1.0), (x[e].unwrap(), 1.0)],
            ComparisonOp::Le,
            net.link(e).capacity + sub,
        );
    }
    // The origin emits exactly lambda over its surviving links.
    let origin_terms: Vec<(Variable, f64)> = net
        .out_links(0)
        .iter()
        .filter_map(|&e| x[e].map(|v| (v, 1.0)))
        .collect();
    if origin_terms.is_empty() {
        if lambda > 0.0 {
            return Ok(0.0); // nothing leaves the origin: unroutable
        }
    } else {
        problem.add_constraint(&origin_terms, ComparisonOp::Eq, lambda);
    }
    // Conservation at every other non-destination node. Empty rows are
    // trivially satisfied and some solvers reject them, so skip those.
    for v in 1..net.node_count() {
        if net.is_destination(v) {
            continue;
        }
        let mut terms: Vec<(Variable, f64)> = Vec::new();
        for &e in net.in_links(v) {
            if let Some(var) = x[e] {
                terms.push((var, 1.0));
            }
        }
        for &e in net.out_links(v) {
            if let Some(var) = x[e] {
                terms.push((var, -1.0));
            }
        }
        if !terms.is_empty() {
            problem.add_constraint(&terms, ComparisonOp::Eq, 0.0);
        }
    }
    match problem.solve() {
        Ok(solution) => Ok(solution[t].max(0.0)),
        Err(minilp::Error::Infeasible) => Ok(0.0),
        Err(err) => Err(ResilienceError::SolverFailure { reason: err.to_string() }),
    }
}
