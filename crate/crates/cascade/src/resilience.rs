//! Margin-of-resilience computations.
//!
//! The *margin of resilience* of a routed network is the smallest total
//! disturbance magnitude that stops the network from transferring its
//! inflow. This module hosts:
//!
//! * [`pwl`] — piecewise-linear curves, the working representation for all
//!   one-dimensional resilience functions;
//! * [`bpa`] — the backward-propagation oracle: per-link and per-node
//!   residual-robustness curves computed leaf-to-root, the maximin splits
//!   they induce, and the resulting lower bound on the margin;
//! * [`centralized`] — the exact network resilience under centralized
//!   (globally re-optimizing) routing, an upper bound for every distributed
//!   policy, computed by a subset recursion over link sets;
//! * [`closed_form`] — exact formulas for the two-parallel-link case, used
//!   as an independent oracle;
//! * [`properties`] — randomized self-checks of the structural laws the
//!   oracle functions must satisfy.
//!
//! [`simple_bounds`] gives the cheap outer bracket: no cascade can be
//! triggered for less than the smallest initial residual, and no network
//! survives losing its whole min-cut residual.

pub mod bpa;
pub mod centralized;
pub mod closed_form;
pub mod properties;
pub mod pwl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{initial_state, DynamicsError};
use crate::network::{FlowNetwork, NetworkError, NodeId};
use crate::routing::RoutingPolicy;

pub use pwl::PwlFunction;

/// Errors raised by resilience computations.
#[derive(Debug, Error)]
pub enum ResilienceError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(
        "no feasible split at node {node}: arriving flow {mu} outside [{min_total}, {max_total}]"
    )]
    InfeasibleSplit {
        node: NodeId,
        mu: f64,
        min_total: f64,
        max_total: f64,
    },
    #[error("subset recursion over {got} links exceeds the limit of {max}")]
    TooManyLinks { got: usize, max: usize },
    #[error("linear-program solver failed: {reason}")]
    SolverFailure { reason: String },
}

/// Cheap outer bracket on the margin of resilience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleBounds {
    /// Smallest initial residual capacity over all links: any disturbance
    /// below this leaves every link strictly under capacity, so nothing at
    /// all happens.
    pub lower: f64,
    /// Residual capacity of a minimum cut: removing it makes the inflow
    /// infeasible outright, so no routing can survive it.
    pub upper: f64,
}

/// Computes the outer bracket from the equilibrium flow at time 0.
pub fn simple_bounds(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
) -> Result<SimpleBounds, ResilienceError> {
    let state = initial_state(net, policy, lambda)?;
    let lower = net
        .links()
        .iter()
        .enumerate()
        .map(|(e, l)| l.capacity - state.flows[e])
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let (_, residual) = net.min_residual_cut(lambda);
    Ok(SimpleBounds { lower, upper: residual })
}
