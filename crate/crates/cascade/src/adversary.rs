//! Worst-case disturbance synthesis.
//!
//! Three constructions produce replayable attack plans:
//!
//! * [`centralized_attack`] — repeatedly hits the active link minimizing
//!   *residual plus obligation* (`C_e - f_e + S(active \ {e})` with `S` from
//!   the centralized subset recursion), paying exactly the residual so the
//!   link dies on the next step; total cost is bounded by the centralized
//!   resilience value.
//! * [`bpa_guided_attack`] — walks down from the origin along the cheapest
//!   first victim of the local maximin problems (at the *current* flows),
//!   killing a link outright where its own residual is the binding term and
//!   descending into the subtree where the subtree is cheaper; total cost is
//!   bounded by the backward-propagation margin.
//! * [`brute_force_attack`] — exhaustive minimum over kill schedules
//!   (ordered groups of simultaneous kills, each charged the settled
//!   residual), the desk-scale ground truth for the margin of resilience.
//!   Partial, non-killing reductions are excluded: with non-negative
//!   cumulative reductions, inactivating `e` at settled time `t` costs
//!   `[C_e - f_e(t)]+` no matter how the mass is spread, so only the kill
//!   order matters.
//!
//! Every constructor replays its schedule through the cascade dynamics
//! before returning and records the verdict; a plan that leaves the network
//! transferring is a construction failure, not a result.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    run, CascadeTrace, DisturbanceSchedule, DynamicsError, NetworkState, RunOptions, Simulator,
};
use crate::network::{FlowNetwork, LinkIx, NetworkError, NodeId};
use crate::resilience::bpa::ResilienceOracle;
use crate::resilience::centralized::CentralizedOracle;
use crate::resilience::ResilienceError;
use crate::routing::RoutingPolicy;

/// Default link-count cap for the exhaustive search.
pub const DEFAULT_BRUTE_LINKS: usize = 12;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error("exhaustive search over {got} links exceeds the limit of {max}")]
    TooManyLinks { got: usize, max: usize },
    #[error("attack construction failed: {reason}")]
    ConstructionFailed { reason: String },
}

/// Which construction produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackConstruction {
    Centralized,
    BpaGuided,
    BruteForce,
}

/// One scheduled reduction, by link id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub t: u32,
    pub link: String,
    pub delta: f64,
}

/// A per-phase log line: which link was charged in which phase. Brute-force
/// phases may carry several simultaneous entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub phase: u32,
    pub t: u32,
    pub link: String,
    pub delta: f64,
}

/// A synthesized disturbance process, replay-verified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackPlan {
    pub construction: AttackConstruction,
    /// The schedule, by link id; `magnitude` is its total.
    pub entries: Vec<AttackEntry>,
    pub magnitude: f64,
    /// The bound the construction promises not to exceed (a resilience
    /// value of the corresponding kind).
    pub predicted_bound: f64,
    pub phases: Vec<PhaseLog>,
    /// Replay verdict: a successful plan leaves this `false`.
    pub transferring_after: bool,
    pub outflow_after: f64,
}

impl AttackPlan {
    /// Rebuilds the executable schedule against a network.
    pub fn schedule(&self, net: &FlowNetwork) -> Result<DisturbanceSchedule, AdversaryError> {
        let mut schedule = DisturbanceSchedule::new();
        for entry in &self.entries {
            let e = net.link_ix(&entry.link)?;
            schedule.add(entry.t, e, entry.delta)?;
        }
        Ok(schedule)
    }

    /// Replays the plan and returns the full trace.
    pub fn replay(
        &self,
        net: &FlowNetwork,
        policy: &RoutingPolicy,
        lambda: f64,
        opts: RunOptions,
    ) -> Result<CascadeTrace, AdversaryError> {
        let schedule = self.schedule(net)?;
        Ok(run(net, policy, lambda, &schedule, opts)?)
    }
}

/// Links usable by an adversary at a settled state: active and fed from the
/// origin through active links (anything else carries no flow, so paying its
/// full capacity can never help).
fn reachable_active(net: &FlowNetwork, state: &NetworkState) -> Vec<LinkIx> {
    let mut node_reached = vec![false; net.node_count()];
    let mut out = Vec::new();
    if !state.active_nodes[0] {
        return out;
    }
    node_reached[0] = true;
    for &v in net.topo_order() {
        if !node_reached[v] || !state.active_nodes[v] {
            continue;
        }
        for &e in net.out_links(v) {
            if state.active_links[e] {
                out.push(e);
                node_reached[net.link(e).head] = true;
            }
        }
    }
    out.sort_unstable();
    out
}

fn finalize_plan(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
    tol: f64,
    construction: AttackConstruction,
    predicted_bound: f64,
    phases: Vec<PhaseLog>,
) -> Result<AttackPlan, AdversaryError> {
    let entries: Vec<AttackEntry> = phases
        .iter()
        .map(|p| AttackEntry { t: p.t, link: p.link.clone(), delta: p.delta })
        .collect();
    let mut plan = AttackPlan {
        construction,
        entries,
        magnitude: phases.iter().map(|p| p.delta).sum(),
        predicted_bound,
        phases,
        transferring_after: true,
        outflow_after: f64::NAN,
    };
    let trace = plan.replay(net, policy, lambda, RunOptions { tol, record: false })?;
    plan.transferring_after = trace.transferring;
    plan.outflow_after = trace.outflow;
    if trace.transferring {
        return Err(AdversaryError::ConstructionFailed {
            reason: format!(
                "{:?} schedule of magnitude {} left the network transferring",
                plan.construction, plan.magnitude
            ),
        });
    }
    Ok(plan)
}

/// Greedy subset-recursion attack against any routing policy: at every
/// settled state, hit the reachable link minimizing residual plus
/// centralized obligation, charging exactly the residual. Total cost never
/// exceeds the centralized resilience of the intact network.
pub fn centralized_attack(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
) -> Result<AttackPlan, AdversaryError> {
    let tol = crate::DEFAULT_TOL;
    let oracle = CentralizedOracle::build(net, lambda)?;
    let mut sim = Simulator::new(net, policy, lambda, tol)?;
    sim.settle()?;
    let mut phases = Vec::new();
    let mut phase = 0u32;
    while sim.is_transferring() {
        phase += 1;
        if phase > net.link_count() as u32 + 1 {
            return Err(AdversaryError::ConstructionFailed {
                reason: "centralized attack did not terminate".into(),
            });
        }
        let candidates = reachable_active(net, &sim.state);
        let mask = CentralizedOracle::mask_of(&sim.state.active_links);
        let target = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let cost = |e: LinkIx| {
                    (sim.state.capacities[e] - sim.state.flows[e]).max(0.0)
                        + oracle.value_without(mask, e)
                };
                cost(a).partial_cmp(&cost(b)).unwrap().then(a.cmp(&b))
            })
            .ok_or_else(|| AdversaryError::ConstructionFailed {
                reason: "transferring state with no reachable active link".into(),
            })?;
        let delta = (sim.state.capacities[target] - sim.state.flows[target]).max(0.0);
        let t = sim.state.time + 1;
        phases.push(PhaseLog { phase, t, link: net.link(target).id.clone(), delta });
        sim.apply(&[(target, delta)])?;
        sim.settle()?;
    }
    finalize_plan(
        net,
        policy,
        lambda,
        tol,
        AttackConstruction::Centralized,
        oracle.resilience(),
        phases,
    )
}

/// Curve-descent attack guided by the backward-propagation oracle: per
/// phase, descend from the origin along the cheapest first victim of the
/// local maximin (evaluated at the current flows), then kill one link by
/// charging its settled residual. Total cost tracks the margin the oracle
/// guarantees.
pub fn bpa_guided_attack(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    oracle: &ResilienceOracle,
    lambda: f64,
) -> Result<AttackPlan, AdversaryError> {
    let tol = crate::DEFAULT_TOL;
    let mut sim = Simulator::new(net, policy, lambda, tol)?;
    sim.settle()?;
    let predicted = oracle.s_star(lambda);
    let mut phases = Vec::new();
    let mut phase = 0u32;
    while sim.is_transferring() {
        phase += 1;
        if phase > 2 * net.link_count() as u32 + 4 {
            return Err(AdversaryError::ConstructionFailed {
                reason: "guided attack did not terminate".into(),
            });
        }
        // Descend from the origin to the link to charge.
        let mut v: NodeId = 0;
        let target = loop {
            let active: Vec<LinkIx> = net
                .out_links(v)
                .iter()
                .copied()
                .filter(|&e| sim.state.active_links[e])
                .collect();
            if active.is_empty() {
                return Err(AdversaryError::ConstructionFailed {
                    reason: format!("descended into node {v} with no active out-link"),
                });
            }
            let mu = sim.state.inflow_at(net, v, lambda);
            let flows: Vec<f64> = active.iter().map(|&e| sim.state.flows[e]).collect();
            // Cheapest first victim: own kill cost plus the survivors'
            // obligation at the current flows.
            let best = (0..active.len())
                .min_by(|&a, &b| {
                    let metric = |i: usize| {
                        let rest: Vec<LinkIx> = active
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, &e)| e)
                            .collect();
                        let rest_r: Vec<f64> = (0..active.len())
                            .filter(|&j| j != i)
                            .map(|j| flows[j])
                            .collect();
                        oracle.link_fn(active[i]).eval(flows[i])
                            + oracle.s_value(v, &rest, &rest_r, mu)
                    };
                    metric(a)
                        .partial_cmp(&metric(b))
                        .unwrap()
                        .then(active[a].cmp(&active[b]))
                })
                .unwrap();
            let e = active[best];
            let residual = (sim.state.capacities[e] - sim.state.flows[e]).max(0.0);
            let head = net.link(e).head;
            let head_value = match oracle.node_curve(head) {
                None => f64::INFINITY, // destination: only the link itself can fail
                Some(curve) => curve.eval(sim.state.flows[e]),
            };
            if residual <= head_value + 1e-12 {
                break e;
            }
            v = head;
        };
        let delta = (sim.state.capacities[target] - sim.state.flows[target]).max(0.0);
        let t = sim.state.time + 1;
        phases.push(PhaseLog { phase, t, link: net.link(target).id.clone(), delta });
        sim.apply(&[(target, delta)])?;
        sim.settle()?;
    }
    finalize_plan(net, policy, lambda, tol, AttackConstruction::BpaGuided, predicted, phases)
}

/// Exhaustive minimum-magnitude kill schedule. The search explores settled
/// states; a settled state is fully determined by its active-link set (kills
/// charge exact residuals, so surviving links always carry nominal
/// capacity), which makes the state space memoizable by bitmask.
pub fn brute_force_attack(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
    max_links: usize,
) -> Result<AttackPlan, AdversaryError> {
    let m = net.link_count();
    if m > max_links.min(24) {
        return Err(AdversaryError::TooManyLinks { got: m, max: max_links.min(24) });
    }
    let tol = crate::DEFAULT_TOL;
    let mut sim = Simulator::new(net, policy, lambda, tol)?;
    sim.settle()?;

    // best_from(settled state) = cheapest additional magnitude that stops
    // the transfer; memoized by active mask together with the first kill
    // group realizing it.
    struct Ctx<'a> {
        net: &'a FlowNetwork,
        policy: &'a RoutingPolicy,
        lambda: f64,
        tol: f64,
        memo: Mutex<HashMap<u32, (f64, Vec<LinkIx>)>>,
    }

    fn mask_of(active: &[bool]) -> u32 {
        active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .fold(0u32, |m, (e, _)| m | 1 << e)
    }

    fn subsets(items: &[LinkIx]) -> Vec<Vec<LinkIx>> {
        (1..(1u32 << items.len()))
            .map(|mask| {
                (0..items.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| items[i])
                    .collect()
            })
            .collect()
    }

    fn best_from(ctx: &Ctx, state: &NetworkState) -> Result<(f64, Vec<LinkIx>), AdversaryError> {
        let transferring =
            (state.destination_inflow(ctx.net, ctx.lambda) - ctx.lambda).abs() <= 1e-9;
        if !transferring {
            return Ok((0.0, Vec::new()));
        }
        let mask = mask_of(&state.active_links);
        if let Some(hit) = ctx.memo.lock().unwrap().get(&mask) {
            return Ok(hit.clone());
        }
        let candidates = reachable_active(ctx.net, state);
        // Order groups by immediate cost so the incumbent prunes early.
        let mut groups: Vec<(f64, Vec<LinkIx>)> = subsets(&candidates)
            .into_iter()
            .map(|g| {
                let cost: f64 = g
                    .iter()
                    .map(|&e| (state.capacities[e] - state.flows[e]).max(0.0))
                    .sum();
                (cost, g)
            })
            .collect();
        groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best = (f64::INFINITY, Vec::new());
        for (cost, group) in groups {
            if cost >= best.0 {
                break; // sorted: nothing cheaper can follow
            }
            let deltas: Vec<(LinkIx, f64)> = group
                .iter()
                .map(|&e| (e, (state.capacities[e] - state.flows[e]).max(0.0)))
                .collect();
            let mut sim = Simulator {
                net: ctx.net,
                policy: ctx.policy,
                lambda: ctx.lambda,
                tol: ctx.tol,
                state: state.clone(),
            };
            sim.apply(&deltas)?;
            sim.settle()?;
            let (rest, _) = best_from(ctx, &sim.state)?;
            if cost + rest < best.0 {
                best = (cost + rest, group);
            }
        }
        ctx.memo.lock().unwrap().insert(mask, best.clone());
        Ok(best)
    }

    let ctx = Ctx { net, policy, lambda, tol, memo: Mutex::new(HashMap::new()) };

    // Explore the first-level groups in parallel to warm the shared memo,
    // then resolve sequentially (values are pure, so this is deterministic).
    if sim.is_transferring() {
        let candidates = reachable_active(net, &sim.state);
        let first: Vec<Vec<LinkIx>> = subsets(&candidates);
        let root = sim.state.clone();
        first
            .par_iter()
            .map(|group| {
                let deltas: Vec<(LinkIx, f64)> = group
                    .iter()
                    .map(|&e| (e, (root.capacities[e] - root.flows[e]).max(0.0)))
                    .collect();
                let mut sim = Simulator { net, policy, lambda, tol, state: root.clone() };
                sim.apply(&deltas)?;
                sim.settle()?;
                best_from(&ctx, &sim.state).map(|_| ())
            })
            .collect::<Result<Vec<()>, AdversaryError>>()?;
    }

    // Walk the memoized optimum forward, recording phases with real times.
    let mut phases = Vec::new();
    let mut phase = 0u32;
    while sim.is_transferring() {
        phase += 1;
        if phase > m as u32 + 1 {
            return Err(AdversaryError::ConstructionFailed {
                reason: "exhaustive schedule reconstruction did not terminate".into(),
            });
        }
        let (_, group) = best_from(&ctx, &sim.state)?;
        if group.is_empty() {
            return Err(AdversaryError::ConstructionFailed {
                reason: "no kill group stops a transferring state".into(),
            });
        }
        let t = sim.state.time + 1;
        let deltas: Vec<(LinkIx, f64)> = group
            .iter()
            .map(|&e| (e, (sim.state.capacities[e] - sim.state.flows[e]).max(0.0)))
            .collect();
        for &(e, d) in &deltas {
            phases.push(PhaseLog { phase, t, link: net.link(e).id.clone(), delta: d });
        }
        sim.apply(&deltas)?;
        sim.settle()?;
    }

    let bound = phases.iter().map(|p| p.delta).sum();
    finalize_plan(net, policy, lambda, tol, AttackConstruction::BruteForce, bound, phases)
}

/// The exhaustive margin of resilience itself.
pub fn brute_force_margin(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    lambda: f64,
    max_links: usize,
) -> Result<f64, AdversaryError> {
    Ok(brute_force_attack(net, policy, lambda, max_links)?.magnitude)
}

/// Random disturbance schedule of a given total magnitude, spread over a few
/// links and times; per-link totals are clamped to capacities. Used to fuzz
/// lower bounds: schedules cheaper than the margin must leave the network
/// transferring.
pub fn random_schedule(
    net: &FlowNetwork,
    total: f64,
    horizon: u32,
    rng: &mut impl Rng,
) -> DisturbanceSchedule {
    let m = net.link_count();
    let mut schedule = DisturbanceSchedule::new();
    let pieces = rng.gen_range(1..=5usize);
    // Stick-breaking split of the total.
    let mut weights: Vec<f64> = (0..pieces).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= total / sum;
    }
    let mut headroom: Vec<f64> = net.links().iter().map(|l| l.capacity).collect();
    for w in weights {
        let t = rng.gen_range(1..=horizon.max(1));
        let e = rng.gen_range(0..m);
        let delta = w.min(headroom[e]);
        if delta > 0.0 {
            headroom[e] -= delta;
            schedule.add(t, e, delta).expect("valid fuzz entry");
        }
    }
    schedule
}
