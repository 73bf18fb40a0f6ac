//! Synchronous cascade dynamics.
//!
//! Time is discrete. All four update rules read the state at time `t` and
//! jointly produce the state at time `t + 1`:
//!
//! 1. an active link becomes inactive when its flow has reached its current
//!    capacity, or when its head node (a non-destination) was inactive;
//! 2. an active non-destination node becomes inactive when it had no active
//!    outgoing link;
//! 3. every node that was active routes the flow arriving on its active
//!    incoming links (plus the external inflow at the origin) over its active
//!    outgoing links according to the routing policy; links not assigned a
//!    flow this way, and links that just became inactive, carry zero;
//! 4. current capacities drop by the disturbance scheduled for `t + 1` on
//!    links that were active.
//!
//! Inactivations are irreversible. A cascade settles when, past the
//! disturbance horizon, one further step changes no activation set and moves
//! no flow by more than the tolerance. The network is *transferring* at the
//! settled state when the total inflow into the destinations equals the
//! external inflow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{FlowNetwork, LinkIx, NetworkError, NodeId};
use crate::routing::{PolicyError, RoutingPolicy};
use crate::DEFAULT_TOL;

/// Why a link left the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InactivationCause {
    /// Flow reached the link's current capacity.
    Overload,
    /// The link's head node was inactive.
    DeadHead,
}

/// Errors raised while building schedules or running cascades.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("disturbance times start at 1")]
    DisturbanceAtTimeZero,
    #[error("disturbance increment on link {id:?} must be finite and non-negative, got {delta}")]
    InvalidDisturbance { id: String, delta: f64 },
    #[error("scheduled reductions on link {id:?} total {total}, exceeding its capacity {capacity}")]
    DisturbanceExceedsCapacity { id: String, total: f64, capacity: f64 },
    #[error("cascade did not settle within {cap} steps")]
    NonTermination { cap: u32 },
}

/// A capacity-reduction process: per time step, a list of `(link, delta)`
/// reductions taking effect at that step. Times start at 1; step 0 is the
/// undisturbed equilibrium.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSchedule {
    by_time: BTreeMap<u32, Vec<(LinkIx, f64)>>,
}

impl DisturbanceSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a reduction of `delta` on `link` taking effect at time `t >= 1`.
    /// Repeated reductions on the same link and time accumulate.
    pub fn add(&mut self, t: u32, link: LinkIx, delta: f64) -> Result<(), DynamicsError> {
        if t == 0 {
            return Err(DynamicsError::DisturbanceAtTimeZero);
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(DynamicsError::InvalidDisturbance {
                id: format!("#{link}"),
                delta,
            });
        }
        let slot = self.by_time.entry(t).or_default();
        match slot.iter_mut().find(|(e, _)| *e == link) {
            Some((_, d)) => *d += delta,
            None => {
                slot.push((link, delta));
                slot.sort_by_key(|&(e, _)| e);
            }
        }
        Ok(())
    }

    /// Reductions taking effect at time `t`, ordered by link index.
    pub fn at(&self, t: u32) -> &[(LinkIx, f64)] {
        self.by_time.get(&t).map_or(&[], |v| v.as_slice())
    }

    /// Latest time with a scheduled reduction (0 when empty).
    pub fn horizon(&self) -> u32 {
        self.by_time.keys().next_back().copied().unwrap_or(0)
    }

    /// Total scheduled reduction over all links and times — the magnitude of
    /// the disturbance process.
    pub fn magnitude(&self) -> f64 {
        self.by_time.values().flatten().map(|&(_, d)| d).sum()
    }

    /// Total scheduled reduction per link.
    pub fn totals(&self, link_count: usize) -> Vec<f64> {
        let mut tot = vec![0.0; link_count];
        for (e, d) in self.by_time.values().flatten() {
            tot[*e] += *d;
        }
        tot
    }

    pub fn is_empty(&self) -> bool {
        self.by_time.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, LinkIx, f64)> + '_ {
        self.by_time
            .iter()
            .flat_map(|(&t, v)| v.iter().map(move |&(e, d)| (t, e, d)))
    }

    /// Checks that cumulative reductions never exceed nominal capacities, so
    /// current capacities stay non-negative.
    pub fn validate_against(&self, net: &FlowNetwork) -> Result<(), DynamicsError> {
        for (e, total) in self.totals(net.link_count()).into_iter().enumerate() {
            let capacity = net.link(e).capacity;
            if total > capacity + 1e-12 {
                return Err(DynamicsError::DisturbanceExceedsCapacity {
                    id: net.link(e).id.clone(),
                    total,
                    capacity,
                });
            }
        }
        Ok(())
    }
}

/// Full dynamic state at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub time: u32,
    pub active_links: Vec<bool>,
    /// Activity per node. Destinations are always active; the origin and
    /// intermediate nodes deactivate when they lose their last outgoing link.
    pub active_nodes: Vec<bool>,
    /// Current flows; zero on inactive or unassigned links.
    pub flows: Vec<f64>,
    /// Current (disturbance-reduced) capacities.
    pub capacities: Vec<f64>,
}

impl NetworkState {
    /// True when no active link has reached its current capacity under the
    /// overload tolerance, i.e. the state is a feasible equilibrium.
    pub fn is_equilibrium_feasible(&self, tol: f64) -> bool {
        self.active_links
            .iter()
            .enumerate()
            .all(|(e, &a)| !a || self.flows[e] < self.capacities[e] - tol)
    }

    /// Flow arriving at `v`: external inflow at the origin plus the flows on
    /// active incoming links.
    pub fn inflow_at(&self, net: &FlowNetwork, v: NodeId, lambda: f64) -> f64 {
        let external = if v == 0 { lambda } else { 0.0 };
        external
            + net
                .in_links(v)
                .iter()
                .filter(|&&e| self.active_links[e])
                .map(|&e| self.flows[e])
                .sum::<f64>()
    }

    /// Total flow arriving at the destination nodes.
    pub fn destination_inflow(&self, net: &FlowNetwork, lambda: f64) -> f64 {
        net.destinations()
            .iter()
            .map(|&d| self.inflow_at(net, d, lambda))
            .sum()
    }
}

/// What changed during a single step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    /// Links removed because flow reached capacity.
    pub overloaded: Vec<LinkIx>,
    /// Links removed because their head node was inactive.
    pub dead_head: Vec<LinkIx>,
    /// Nodes removed because they had no active outgoing link.
    pub dropped_nodes: Vec<NodeId>,
    /// Largest absolute flow change across all links.
    pub max_flow_change: f64,
}

impl StepEvents {
    pub fn is_quiet(&self, tol: f64) -> bool {
        self.overloaded.is_empty()
            && self.dead_head.is_empty()
            && self.dropped_nodes.is_empty()
            && self.max_flow_change < tol
    }
}

/// The equilibrium state at time 0: everything active, nominal capacities,
/// flows propagated from the origin in topological order.
pub fn initial_state(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
) -> Result<NetworkState, DynamicsError> {
    net.feasibility_check(lambda)?;
    let m = net.link_count();
    let mut state = NetworkState {
        time: 0,
        active_links: vec![true; m],
        active_nodes: vec![true; net.node_count()],
        flows: vec![0.0; m],
        capacities: net.links().iter().map(|l| l.capacity).collect(),
    };
    for &v in net.topo_order() {
        if net.is_destination(v) {
            continue;
        }
        let mu = state.inflow_at(net, v, lambda);
        let out: Vec<LinkIx> = net.out_links(v).to_vec();
        let split = policy.split(net, v, &out, mu)?;
        for (&e, &x) in out.iter().zip(&split) {
            state.flows[e] = x;
        }
    }
    Ok(state)
}

/// Advances the state by one step. `disturbance` lists the capacity
/// reductions taking effect at `t + 1`; they only apply to links active at
/// `t`. All rules read the time-`t` state.
pub fn step(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    state: &NetworkState,
    disturbance: &[(LinkIx, f64)],
    lambda: f64,
    tol: f64,
) -> Result<(NetworkState, StepEvents), DynamicsError> {
    let m = net.link_count();
    let mut events = StepEvents::default();
    let mut next = state.clone();
    next.time = state.time + 1;

    // Rule 1: link inactivation from time-t flows, capacities and node
    // activity. Overload takes precedence in the recorded cause.
    for e in 0..m {
        if !state.active_links[e] {
            continue;
        }
        if state.flows[e] >= state.capacities[e] - tol {
            next.active_links[e] = false;
            events.overloaded.push(e);
        } else {
            let head = net.link(e).head;
            if !net.is_destination(head) && !state.active_nodes[head] {
                next.active_links[e] = false;
                events.dead_head.push(e);
            }
        }
    }

    // Rule 2: node inactivation from time-t link activity.
    for v in 0..net.node_count() {
        if net.is_destination(v) || !state.active_nodes[v] {
            continue;
        }
        let any_out = net.out_links(v).iter().any(|&e| state.active_links[e]);
        if !any_out {
            next.active_nodes[v] = false;
            events.dropped_nodes.push(v);
        }
    }

    // Rule 3: routing from time-t activity and flows. Nodes active at t
    // split their time-t arriving flow over their time-t active outgoing
    // links; links inactive at t + 1 are then cleared to zero.
    let mut new_flows = vec![0.0; m];
    for v in 0..net.node_count() {
        if net.is_destination(v) || !state.active_nodes[v] {
            continue;
        }
        let active_out: Vec<LinkIx> = net
            .out_links(v)
            .iter()
            .copied()
            .filter(|&e| state.active_links[e])
            .collect();
        if active_out.is_empty() {
            continue;
        }
        let mu = state.inflow_at(net, v, lambda);
        let split = policy.split(net, v, &active_out, mu)?;
        for (&e, &x) in active_out.iter().zip(&split) {
            new_flows[e] = x;
        }
    }
    for e in 0..m {
        if !next.active_links[e] {
            new_flows[e] = 0.0;
        }
    }
    events.max_flow_change = new_flows
        .iter()
        .zip(&state.flows)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    next.flows = new_flows;

    // Rule 4: capacity reductions taking effect at t + 1 on links active at t.
    for &(e, d) in disturbance {
        if state.active_links[e] {
            next.capacities[e] = (next.capacities[e] - d).max(0.0);
        }
    }

    Ok((next, events))
}

/// One recorded step of a cascade trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u32,
    /// Links inactivated on entry to this step, with causes.
    pub inactivated_links: Vec<(String, InactivationCause)>,
    /// Nodes inactivated on entry to this step.
    pub inactivated_nodes: Vec<NodeId>,
    /// Flows by link id at this step.
    pub flows: BTreeMap<String, f64>,
    /// Current capacities by link id at this step.
    pub capacities: BTreeMap<String, f64>,
    /// Remaining headroom (capacity minus flow) by link id; zero once a link
    /// is inactive.
    pub residual: BTreeMap<String, f64>,
}

/// A full cascade run: per-step records plus the settled verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub lambda: f64,
    pub steps: Vec<TraceStep>,
    /// First time from which one further step changes nothing.
    pub settled_at: u32,
    /// Total flow arriving at the destinations at the settled state.
    pub outflow: f64,
    /// Whether the settled outflow equals the external inflow.
    pub transferring: bool,
    /// Whether the origin was still active at the settled state.
    pub origin_active: bool,
    #[serde(skip)]
    pub final_state: Option<NetworkState>,
}

/// A violation of the transfer dichotomy: at settlement the delivered flow
/// must be either the full inflow (origin active) or zero (origin inactive).
#[derive(Debug, Error)]
#[error(
    "transfer dichotomy violated: outflow {outflow} with lambda {lambda}, origin_active {origin_active}"
)]
pub struct DichotomyViolation {
    pub outflow: f64,
    pub lambda: f64,
    pub origin_active: bool,
}

impl CascadeTrace {
    /// Checks that the settled state delivers either the full inflow (with
    /// the origin active) or none of it (with the origin inactive), within an
    /// absolute tolerance.
    pub fn check_transfer_dichotomy(&self, tol: f64) -> Result<(), DichotomyViolation> {
        let full = (self.outflow - self.lambda).abs() <= tol;
        let none = self.outflow.abs() <= tol;
        let consistent = (full && self.origin_active && self.transferring)
            || (none && !self.origin_active && !self.transferring);
        // lambda == 0 satisfies both branches; either origin state is fine.
        let degenerate = self.lambda <= tol && none;
        if consistent || degenerate {
            Ok(())
        } else {
            Err(DichotomyViolation {
                outflow: self.outflow,
                lambda: self.lambda,
                origin_active: self.origin_active,
            })
        }
    }
}

/// Options controlling a cascade run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Overload / settlement tolerance.
    pub tol: f64,
    /// Whether to keep per-step records (attack searches turn this off).
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, record: true }
    }
}

/// Stateful cascade runner used by both the one-shot [`run`] entry point and
/// the adversarial search loops.
pub struct Simulator<'a> {
    pub net: &'a FlowNetwork,
    pub policy: &'a RoutingPolicy,
    pub lambda: f64,
    pub tol: f64,
    pub state: NetworkState,
}

impl<'a> Simulator<'a> {
    pub fn new(
        net: &'a FlowNetwork,
        policy: &'a RoutingPolicy,
        lambda: f64,
        tol: f64,
    ) -> Result<Self, DynamicsError> {
        let state = initial_state(net, policy, lambda)?;
        Ok(Self { net, policy, lambda, tol, state })
    }

    /// Advances one step under the given reductions.
    pub fn apply(&mut self, disturbance: &[(LinkIx, f64)]) -> Result<StepEvents, DynamicsError> {
        let (next, events) =
            step(self.net, self.policy, &self.state, disturbance, self.lambda, self.tol)?;
        self.state = next;
        Ok(events)
    }

    /// Steps without further disturbance until one full step changes nothing,
    /// returning the settled time. Activation sets only shrink, so this
    /// terminates; the cap guards against implementation errors.
    pub fn settle(&mut self) -> Result<u32, DynamicsError> {
        let cap = 10 * self.net.link_count() as u32 + 10;
        for _ in 0..cap {
            let before = self.state.clone();
            let events = self.apply(&[])?;
            if events.is_quiet(self.tol) {
                self.state = before;
                return Ok(self.state.time);
            }
        }
        Err(DynamicsError::NonTermination { cap })
    }

    /// Whether the current state delivers the full inflow to the
    /// destinations. Meaningful once settled.
    pub fn is_transferring(&self) -> bool {
        (self.state.destination_inflow(self.net, self.lambda) - self.lambda).abs() <= 1e-9
    }
}

/// Runs a cascade to settlement under a disturbance schedule, recording a
/// full trace.
pub fn run(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
    schedule: &DisturbanceSchedule,
    opts: RunOptions,
) -> Result<CascadeTrace, DynamicsError> {
    schedule.validate_against(net)?;
    let mut sim = Simulator::new(net, policy, lambda, opts.tol)?;
    let horizon = schedule.horizon();
    let cap = 10 * net.link_count() as u32 + horizon + 10;

    let mut steps = Vec::new();
    let record = |state: &NetworkState, events: Option<&StepEvents>, steps: &mut Vec<TraceStep>| {
        let ids = |list: &[LinkIx], cause: InactivationCause| {
            list.iter()
                .map(|&e| (net.link(e).id.clone(), cause))
                .collect::<Vec<_>>()
        };
        let mut inactivated_links = Vec::new();
        let mut inactivated_nodes = Vec::new();
        if let Some(ev) = events {
            inactivated_links.extend(ids(&ev.overloaded, InactivationCause::Overload));
            inactivated_links.extend(ids(&ev.dead_head, InactivationCause::DeadHead));
            inactivated_nodes = ev.dropped_nodes.clone();
        }
        steps.push(TraceStep {
            t: state.time,
            inactivated_links,
            inactivated_nodes,
            flows: net
                .links()
                .iter()
                .enumerate()
                .map(|(e, l)| (l.id.clone(), state.flows[e]))
                .collect(),
            capacities: net
                .links()
                .iter()
                .enumerate()
                .map(|(e, l)| (l.id.clone(), state.capacities[e]))
                .collect(),
            residual: net
                .links()
                .iter()
                .enumerate()
                .map(|(e, l)| {
                    let headroom = if state.active_links[e] {
                        (state.capacities[e] - state.flows[e]).max(0.0)
                    } else {
                        0.0
                    };
                    (l.id.clone(), headroom)
                })
                .collect(),
        });
    };

    if opts.record {
        record(&sim.state, None, &mut steps);
    }
    let settled_at = loop {
        let t = sim.state.time;
        if t >= cap {
            return Err(DynamicsError::NonTermination { cap });
        }
        let delta = schedule.at(t + 1).to_vec();
        if t >= horizon && delta.is_empty() {
            // Probe for settlement: a quiet step means time t was settled.
            let before = sim.state.clone();
            let events = sim.apply(&[])?;
            if events.is_quiet(opts.tol) {
                sim.state = before;
                break t;
            }
            if opts.record {
                record(&sim.state, Some(&events), &mut steps);
            }
        } else {
            let events = sim.apply(&delta)?;
            if opts.record {
                record(&sim.state, Some(&events), &mut steps);
            }
        }
    };

    let outflow = sim.state.destination_inflow(net, lambda);
    let transferring = (outflow - lambda).abs() <= 1e-9;
    let origin_active = sim.state.active_nodes[0];
    let trace = CascadeTrace {
        lambda,
        steps,
        settled_at,
        outflow,
        transferring,
        origin_active,
        final_state: Some(sim.state),
    };
    debug_assert!(
        trace.check_transfer_dichotomy(1e-9).is_ok(),
        "settled state must deliver all of the inflow or none of it"
    );
    Ok(trace)
}

/// Writes the flow history as CSV: one row per (time, link).
pub fn flow_history_csv<W: std::io::Write>(
    trace: &CascadeTrace,
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "link", "flow", "capacity"])?;
    for step in &trace.steps {
        for (id, flow) in &step.flows {
            let cap = step.capacities[id];
            w.write_record([
                step.t.to_string(),
                id.clone(),
                format!("{flow}"),
                format!("{cap}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
