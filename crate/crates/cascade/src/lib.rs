//! Cascading-failure analysis for single-commodity capacitated flow networks.
//!
//! A flow network here is a finite directed acyclic multigraph with one origin
//! (node `0`), one or more destination nodes (nodes without outgoing links),
//! and strictly positive link capacities. A constant inflow `lambda` enters at
//! the origin and is forwarded hop by hop according to a *routing policy*: a
//! per-node rule that splits the inflow arriving at a node over its currently
//! active outgoing links, using only locally observable information.
//!
//! An external *disturbance process* reduces link capacities over time. Links
//! whose flow reaches their (reduced) capacity become inactive, nodes without
//! active outgoing links become inactive, and upstream links pointing at
//! inactive nodes become inactive in turn — a cascade. The network survives a
//! disturbance when, after the cascade settles, the full inflow still reaches
//! the destinations; the *margin of resilience* is the smallest total capacity
//! reduction that makes it fail.
//!
//! The crate provides:
//!
//! * [`network`] — the graph model, validation, min-cut computations, and
//!   tree-shape predicates;
//! * [`dynamics`] — the synchronous cascade update, trace recording, and the
//!   transfer test;
//! * [`routing`] — routing policies (proportional, tabulated, residual-guided)
//!   and monotonicity checkers;
//! * [`resilience`] — simple residual bounds, the exact set-recursive margin
//!   for acyclic networks, the backward-propagation oracle that both bounds
//!   the margin and induces a maximally robust policy, and piecewise-linear
//!   curve utilities;
//! * [`adversary`] — synthesis of worst-case disturbance processes and a
//!   brute-force margin search for small networks.
//!
//! The companion `cascade-cli` crate wraps all of this behind scenario files
//! and subcommands.

pub mod adversary;
pub mod dynamics;
pub mod network;
pub mod resilience;
pub mod routing;

#[cfg(test)]
pub(crate) mod testnet;

pub use dynamics::{CascadeTrace, DisturbanceSchedule, NetworkState, Simulator};
pub use network::{FlowNetwork, Link, NetworkError};
pub use routing::RoutingPolicy;

/// Default absolute tolerance used for overload detection and settlement
/// tests. A link is treated as overloaded when its flow is within this
/// distance of (or beyond) its current capacity.
pub const DEFAULT_TOL: f64 = 1e-9;
