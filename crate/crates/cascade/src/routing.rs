//! Routing policies and monotonicity diagnostics.
//!
//! A routing policy answers one question: given a node, the currently active
//! subset of its outgoing links, and the flow arriving at the node, how is
//! that flow split over those links? Policies here are *local* — they may
//! only use the identity of the node, the active subset, and the arriving
//! flow — which is what makes the cascade dynamics distributed.
//!
//! Two monotonicity notions matter for resilience guarantees:
//!
//! * *link monotonicity*: when the active set shrinks, no surviving link's
//!   share decreases — survivors absorb the lost flow;
//! * *flow monotonicity*: at fixed active set, every link's share is
//!   non-decreasing in the arriving flow.
//!
//! Both are checked numerically on grids ([`check_link_monotonicity`],
//! [`check_flow_monotonicity`]) with replayable witnesses. A structural
//! analysis ([`structural_flow_monotonicity`]) proves flow monotonicity of
//! the residual-guided policy for tree shapes assembled from known-safe
//! building blocks, without grid search over policies.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{FlowNetwork, LinkIx, NodeId};
use crate::resilience::bpa::{BpaPolicy, ResilienceOracle};
use crate::resilience::pwl::sample_grid;
use crate::resilience::ResilienceError;

/// Decision threshold for the numeric monotonicity checkers: a share must
/// move the wrong way by more than this to count as a violation.
pub const MONOTONICITY_TOL: f64 = 1e-7;

/// Errors raised by policy evaluation.
#[derive(Debug, Clone, Error)]
pub enum PolicyError {
    #[error("no routing table entry for node {node} with active links {subset:?}")]
    MissingTableEntry { node: NodeId, subset: Vec<String> },
    #[error("routing table for node {node} is malformed: {reason}")]
    BadTable { node: NodeId, reason: String },
    #[error("split at node {node} sums to {sum} instead of the arriving {mu}")]
    ConservationViolation { node: NodeId, sum: f64, mu: f64 },
}

/// One tabulated split: at arriving flow `mu`, route `split[i]` onto the
/// subset's `i`-th link (in network input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub mu: f64,
    pub split: Vec<f64>,
}

/// Piecewise-linear tabulated policy: per (node, active subset) a list of
/// rows interpolated in `mu`. Below the first row the split is scaled down
/// linearly toward zero; above the last row it is scaled up proportionally.
/// Querying a subset with no table entry is an error.
#[derive(Debug, Clone, Default)]
pub struct TablePolicy {
    entries: BTreeMap<(NodeId, Vec<String>), Vec<TableRow>>,
}

impl TablePolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers rows for a node and subset of its outgoing links. The
    /// subset is given by link ids; rows must align with the subset sorted
    /// into network input order, carry strictly increasing `mu`, and conserve
    /// flow.
    pub fn insert(
        &mut self,
        net: &FlowNetwork,
        node: NodeId,
        subset_ids: &[String],
        mut rows: Vec<TableRow>,
    ) -> Result<(), PolicyError> {
        let bad = |reason: String| PolicyError::BadTable { node, reason };
        let mut subset: Vec<LinkIx> = Vec::new();
        for id in subset_ids {
            let e = net
                .link_ix(id)
                .map_err(|_| bad(format!("unknown link id {id:?}")))?;
            if net.link(e).tail != node {
                return Err(bad(format!("link {id:?} does not leave node {node}")));
            }
            subset.push(e);
        }
        // Normalize to network input order, carrying the split columns along.
        let mut order: Vec<usize> = (0..subset.len()).collect();
        order.sort_by_key(|&i| subset[i]);
        for row in &mut rows {
            if row.split.len() != subset.len() {
                return Err(bad(format!(
                    "row at mu {} has {} shares for {} links",
                    row.mu,
                    row.split.len(),
                    subset.len()
                )));
            }
            row.split = order.iter().map(|&i| row.split[i]).collect();
            let sum: f64 = row.split.iter().sum();
            if (sum - row.mu).abs() > 1e-9 * (1.0 + row.mu.abs()) {
                return Err(bad(format!("row at mu {} sums to {sum}", row.mu)));
            }
        }
        if rows.is_empty() {
            return Err(bad("no rows".into()));
        }
        if rows.windows(2).any(|w| w[1].mu <= w[0].mu) {
            return Err(bad("row inflows must be strictly increasing".into()));
        }
        let mut key_ids: Vec<String> = order
            .iter()
            .map(|&i| subset_ids[i].clone())
            .collect();
        key_ids.dedup();
        if key_ids.len() != subset.len() {
            return Err(bad("duplicate link in subset".into()));
        }
        self.entries.insert((node, key_ids), rows);
        Ok(())
    }

    fn lookup(
        &self,
        net: &FlowNetwork,
        node: NodeId,
        active: &[LinkIx],
        mu: f64,
    ) -> Result<Vec<f64>, PolicyError> {
        let ids: Vec<String> = active.iter().map(|&e| net.link(e).id.clone()).collect();
        let rows = self
            .entries
            .get(&(node, ids.clone()))
            .ok_or(PolicyError::MissingTableEntry { node, subset: ids })?;
        let interp = |lo: &TableRow, hi: &TableRow, mu: f64| -> Vec<f64> {
            let t = (mu - lo.mu) / (hi.mu - lo.mu);
            lo.split
                .iter()
                .zip(&hi.split)
                .map(|(a, b)| a + t * (b - a))
                .collect()
        };
        let first = rows.first().unwrap();
        let last = rows.last().unwrap();
        if mu <= first.mu {
            // Scale toward the origin so conservation still holds.
            let scale = if first.mu > 0.0 { mu / first.mu } else { 0.0 };
            return Ok(first.split.iter().map(|x| x * scale).collect());
        }
        if mu >= last.mu {
            let scale = if last.mu > 0.0 { mu / last.mu } else { 0.0 };
            return Ok(last.split.iter().map(|x| x * scale).collect());
        }
        let i = rows.partition_point(|r| r.mu <= mu);
        Ok(interp(&rows[i - 1], &rows[i], mu))
    }
}

/// A local routing rule.
#[derive(Debug, Clone)]
pub enum RoutingPolicy {
    /// Split proportionally to the capacities of the active links.
    Proportional,
    /// Interpolate tabulated splits.
    Table(TablePolicy),
    /// Residual-guided maximin splits from a backward-propagation oracle.
    Bpa(Arc<BpaPolicy>),
}

impl RoutingPolicy {
    /// Wraps an oracle as a routing policy.
    pub fn bpa(oracle: ResilienceOracle) -> Self {
        RoutingPolicy::Bpa(Arc::new(BpaPolicy::new(oracle)))
    }

    /// Splits `mu` over the active outgoing links of `v`. The result aligns
    /// with `active`, is non-negative, and sums to `mu`; shares may exceed
    /// link capacities (that is how overloads happen).
    pub fn split(
        &self,
        net: &FlowNetwork,
        v: NodeId,
        active: &[LinkIx],
        mu: f64,
    ) -> Result<Vec<f64>, PolicyError> {
        debug_assert!(!active.is_empty(), "split queried with no active links");
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]), "active set must be sorted");
        let split = match self {
            RoutingPolicy::Proportional => {
                let caps: Vec<f64> = active.iter().map(|&e| net.link(e).capacity).collect();
                let total: f64 = caps.iter().sum();
                caps.iter().map(|&c| if total > 0.0 { c * mu / total } else { 0.0 }).collect()
            }
            RoutingPolicy::Table(table) => table.lookup(net, v, active, mu)?,
            RoutingPolicy::Bpa(policy) => policy.split(v, active, mu),
        };
        let sum: f64 = split.iter().sum();
        if (sum - mu).abs() > 1e-7 * (1.0 + mu.abs()) {
            return Err(PolicyError::ConservationViolation { node: v, sum, mu });
        }
        Ok(split)
    }
}

/// A link-monotonicity violation: dropping links *reduced* some survivor's
/// share. Contains everything needed to replay the two queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkMonotonicityWitness {
    pub node: NodeId,
    pub superset: Vec<String>,
    pub subset: Vec<String>,
    pub mu: f64,
    pub link: String,
    pub share_in_superset: f64,
    pub share_in_subset: f64,
    pub shortfall: f64,
}

/// A flow-monotonicity violation: raising the arriving flow *reduced* some
/// link's share.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowMonotonicityWitness {
    pub node: NodeId,
    pub subset: Vec<String>,
    pub mu_low: f64,
    pub mu_high: f64,
    pub link: String,
    pub share_at_low: f64,
    pub share_at_high: f64,
    pub drop: f64,
}

/// Outcome of a numeric monotonicity sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport<W> {
    /// Number of (node, subset-pair or inflow-pair, grid point) comparisons.
    pub comparisons: u64,
    pub grid_steps: usize,
    pub threshold: f64,
    /// At most [`MonotonicityReport::MAX_WITNESSES`] recorded violations.
    pub witnesses: Vec<W>,
    /// Total number of violations found (may exceed the recorded list).
    pub violations: u64,
}

impl<W> MonotonicityReport<W> {
    pub const MAX_WITNESSES: usize = 100;

    pub fn is_monotone(&self) -> bool {
        self.violations == 0
    }

    fn push(&mut self, w: W) {
        self.violations += 1;
        if self.witnesses.len() < Self::MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }
}

fn nonempty_subsets(links: &[LinkIx]) -> Vec<Vec<LinkIx>> {
    let d = links.len();
    (1..(1u32 << d))
        .map(|mask| {
            (0..d)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| links[i])
                .collect()
        })
        .collect()
}

/// Sweeps every node, every pair `subset ⊂ superset` of its outgoing links,
/// and an inflow grid, checking that survivors never lose share when links
/// drop out. The grid spans `[0, min(in-capacity, out-capacity)]` (just the
/// out-capacity at the origin).
pub fn check_link_monotonicity(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    grid_steps: usize,
) -> Result<MonotonicityReport<LinkMonotonicityWitness>, PolicyError> {
    let mut report = MonotonicityReport {
        comparisons: 0,
        grid_steps,
        threshold: MONOTONICITY_TOL,
        witnesses: Vec::new(),
        violations: 0,
    };
    for v in 0..net.node_count() {
        if net.is_destination(v) {
            continue;
        }
        let out = net.out_links(v);
        let hi = if v == 0 {
            net.out_capacity(v)
        } else {
            net.in_capacity(v).min(net.out_capacity(v))
        };
        let grid = sample_grid(0.0, hi, grid_steps);
        let subsets = nonempty_subsets(out);
        for mu in &grid {
            // Cache this node's splits at this inflow, per subset.
            let mut splits: Vec<Vec<f64>> = Vec::with_capacity(subsets.len());
            for s in &subsets {
                splits.push(policy.split(net, v, s, *mu)?);
            }
            for (ja, a) in subsets.iter().enumerate() {
                for (jb, b) in subsets.iter().enumerate() {
                    if ja == jb || !b.iter().all(|e| a.contains(e)) {
                        continue;
                    }
                    // b is a proper subset of a: shares in b must dominate.
                    for (pos_b, e) in b.iter().enumerate() {
                        let pos_a = a.iter().position(|f| f == e).unwrap();
                        report.comparisons += 1;
                        let big = splits[ja][pos_a];
                        let small = splits[jb][pos_b];
                        if small < big - MONOTONICITY_TOL {
                            report.push(LinkMonotonicityWitness {
                                node: v,
                                superset: a.iter().map(|&e| net.link(e).id.clone()).collect(),
                                subset: b.iter().map(|&e| net.link(e).id.clone()).collect(),
                                mu: *mu,
                                link: net.link(*e).id.clone(),
                                share_in_superset: big,
                                share_in_subset: small,
                                shortfall: big - small,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Sweeps every intermediate node, every nonempty subset of its outgoing
/// links, and all ordered pairs on an inflow grid over `[0, in-capacity]`,
/// checking that every share is non-decreasing in the arriving flow.
pub fn check_flow_monotonicity(
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    grid_steps: usize,
) -> Result<MonotonicityReport<FlowMonotonicityWitness>, PolicyError> {
    let mut report = MonotonicityReport {
        comparisons: 0,
        grid_steps,
        threshold: MONOTONICITY_TOL,
        witnesses: Vec::new(),
        violations: 0,
    };
    for v in 1..net.node_count() {
        if net.is_destination(v) {
            continue;
        }
        let grid = sample_grid(0.0, net.in_capacity(v), grid_steps);
        for subset in nonempty_subsets(net.out_links(v)) {
            let splits: Vec<Vec<f64>> = grid
                .iter()
                .map(|mu| policy.split(net, v, &subset, *mu))
                .collect::<Result<_, _>>()?;
            for i in 0..grid.len() {
                for j in (i + 1)..grid.len() {
                    for (pos, e) in subset.iter().enumerate() {
                        report.comparisons += 1;
                        let lo = splits[i][pos];
                        let hi = splits[j][pos];
                        if hi < lo - MONOTONICITY_TOL {
                            report.push(FlowMonotonicityWitness {
                                node: v,
                                subset: subset
                                    .iter()
                                    .map(|&e| net.link(e).id.clone())
                                    .collect(),
                                mu_low: grid[i],
                                mu_high: grid[j],
                                link: net.link(*e).id.clone(),
                                share_at_low: lo,
                                share_at_high: hi,
                                drop: lo - hi,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// How a node was proven flow-monotone by the structural analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeVerdict {
    /// One outgoing link: the split is the identity.
    SingleOutgoing,
    /// Two outgoing links whose subtrees are at least as robust as the links
    /// themselves; equivalent to two parallel links straight to a
    /// destination.
    TransparentPair,
    /// Two outgoing links: one transparent and at least as wide, the other
    /// leading into a transparent pair.
    CoveredBranch,
    /// Two parallel equal-capacity links into a relay whose onward chain is
    /// transparent.
    ParallelTwin,
    /// All outgoing subtrees identical in shape and capacity.
    SymmetricSubtree,
    /// No safe pattern matched; monotonicity is not established here.
    Unknown,
}

/// Per-node outcome of the structural analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralNodeReport {
    pub node: NodeId,
    pub verdict: NodeVerdict,
    pub detail: String,
}

/// Outcome of [`structural_flow_monotonicity`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralReport {
    /// True when every non-destination node matched a safe pattern.
    pub proven: bool,
    pub nodes: Vec<StructuralNodeReport>,
}

/// Proves flow monotonicity of the residual-guided policy on tree networks
/// by pattern-matching each node against safe building blocks, instead of
/// sweeping inflow grids. Destinations with several incoming links are
/// split first; relay chains (nodes with a single outgoing link) are seen
/// through. Errors when the network is not tree-shaped.
pub fn structural_flow_monotonicity(
    net: &FlowNetwork,
) -> Result<StructuralReport, ResilienceError> {
    let x = net.d_expand();
    x.require_tree()?;
    let oracle = ResilienceOracle::build(&x)?;

    // Effective view through relay chains: a link's chain ends at the first
    // destination or branching node; its effective capacity is the minimum
    // along the way.
    let chain_end = |mut e: LinkIx| -> (NodeId, f64) {
        let mut cap = x.link(e).capacity;
        loop {
            let head = x.link(e).head;
            if x.is_destination(head) || x.out_links(head).len() != 1 {
                return (head, cap);
            }
            e = x.out_links(head)[0];
            cap = cap.min(x.link(e).capacity);
        }
    };
    // Transparent: the subtree behind the chain is at least as robust as the
    // chain itself, so the chain's own residual is the binding constraint.
    let transparent = |e: LinkIx| -> bool {
        let (_, cap) = chain_end(e);
        let f = oracle.link_fn(e);
        sample_grid(0.0, cap, 200)
            .into_iter()
            .all(|mu| f.eval(mu) >= (cap - mu).max(0.0) - 1e-9 * (1.0 + cap))
    };

    fn subtree_symmetric(x: &FlowNetwork, v: NodeId) -> bool {
        fn sig(x: &FlowNetwork, v: NodeId, ok: &mut bool) -> String {
            if x.is_destination(v) {
                return "D".into();
            }
            let parts: Vec<String> = x
                .out_links(v)
                .iter()
                .map(|&e| format!("{:016x}:{}", x.link(e).capacity.to_bits(), sig(x, x.link(e).head, ok)))
                .collect();
            if !parts.windows(2).all(|w| w[0] == w[1]) {
                *ok = false;
            }
            format!("({})", parts.join(","))
        }
        let mut ok = true;
        sig(x, v, &mut ok);
        ok
    }

    let mut verdicts: BTreeMap<NodeId, (NodeVerdict, String)> = BTreeMap::new();
    for &v in x.topo_order().iter().rev() {
        if x.is_destination(v) {
            continue;
        }
        let out = x.out_links(v);
        let entry = if out.len() == 1 {
            (NodeVerdict::SingleOutgoing, "single outgoing link".into())
        } else if out.len() == 2 {
            let (e1, e2) = (out[0], out[1]);
            let (h1, c1) = chain_end(e1);
            let (h2, c2) = chain_end(e2);
            let t1 = transparent(e1);
            let t2 = transparent(e2);
            if t1 && t2 {
                (
                    NodeVerdict::TransparentPair,
                    "both outgoing subtrees are transparent".into(),
                )
            } else if x.link(e1).head == x.link(e2).head
                && !x.is_destination(x.link(e1).head)
                && (x.link(e1).capacity - x.link(e2).capacity).abs()
                    <= 1e-12 * (1.0 + x.link(e1).capacity)
                && x.out_links(x.link(e1).head).len() == 1
                && transparent(x.out_links(x.link(e1).head)[0])
            {
                (
                    NodeVerdict::ParallelTwin,
                    "equal parallel links into a transparent relay".into(),
                )
            } else {
                // Covered branch: transparent side at least as wide as the
                // side leading into a transparent pair.
                let covered = |t_side: bool, c_t: f64, h_o: NodeId, c_o: f64| -> bool {
                    t_side
                        && c_t >= c_o - 1e-12 * (1.0 + c_o)
                        && !x.is_destination(h_o)
                        && matches!(
                            verdicts.get(&h_o).map(|(v, _)| v),
                            Some(NodeVerdict::TransparentPair)
                        )
                };
                if covered(t2, c2, h1, c1) || covered(t1, c1, h2, c2) {
                    (
                        NodeVerdict::CoveredBranch,
                        "transparent link covering a transparent-pair branch".into(),
                    )
                } else if subtree_symmetric(&x, v) {
                    (NodeVerdict::SymmetricSubtree, "identical subtrees".into())
                } else {
                    (
                        NodeVerdict::Unknown,
                        "no safe two-link pattern matched".into(),
                    )
                }
            }
        } else if subtree_symmetric(&x, v) {
            (NodeVerdict::SymmetricSubtree, "identical subtrees".into())
        } else {
            (
                NodeVerdict::Unknown,
                format!("{} outgoing links without symmetry", out.len()),
            )
        };
        verdicts.insert(v, entry);
    }

    let nodes: Vec<StructuralNodeReport> = verdicts
        .into_iter()
        .map(|(node, (verdict, detail))| StructuralNodeReport { node, verdict, detail })
        .collect();
    let proven = nodes.iter().all(|n| n.verdict != NodeVerdict::Unknown);
    Ok(StructuralReport { proven, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{FlowNetwork, Link};
    use crate::testnet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn proportional_split_matches_capacity_ratios() {
        let net = testnet::example1();
        let policy = RoutingPolicy::Proportional;
        let x = policy.split(&net, 0, &[0, 1], 4.0).unwrap();
        assert_abs_diff_eq!(x[0], 2.0);
        assert_abs_diff_eq!(x[1], 2.0);
        let x = policy.split(&net, 4, &[5, 6], 1.0).unwrap();
        assert_abs_diff_eq!(x[0], 0.5);
        assert_abs_diff_eq!(x[1], 0.5);
        // Overload is allowed: shares scale beyond capacity.
        let x = policy.split(&net, 5, &[7], 2.0).unwrap();
        assert_abs_diff_eq!(x[0], 2.0);
    }

    #[test]
    fn table_policy_interpolates_and_extrapolates() {
        let net = testnet::two_link(2.0, 2.0);
        let mut table = TablePolicy::new();
        table
            .insert(
                &net,
                0,
                &["p1".into(), "p2".into()],
                vec![
                    TableRow { mu: 1.0, split: vec![0.25, 0.75] },
                    TableRow { mu: 3.0, split: vec![1.5, 1.5] },
                ],
            )
            .unwrap();
        let policy = RoutingPolicy::Table(table);
        let x = policy.split(&net, 0, &[0, 1], 2.0).unwrap();
        assert_abs_diff_eq!(x[0], 0.875);
        assert_abs_diff_eq!(x[1], 1.125);
        // Below the first row: scaled toward zero.
        let x = policy.split(&net, 0, &[0, 1], 0.5).unwrap();
        assert_abs_diff_eq!(x[0], 0.125);
        // Above the last row: scaled proportionally.
        let x = policy.split(&net, 0, &[0, 1], 6.0).unwrap();
        assert_abs_diff_eq!(x[0], 3.0);
        // Missing subset errors.
        assert!(matches!(
            policy.split(&net, 0, &[0], 1.0),
            Err(PolicyError::MissingTableEntry { .. })
        ));
    }

    #[test]
    fn table_validation_rejects_bad_rows() {
        let net = testnet::two_link(2.0, 2.0);
        let mut table = TablePolicy::new();
        let err = table.insert(
            &net,
            0,
            &["p1".into(), "p2".into()],
            vec![TableRow { mu: 1.0, split: vec![0.9, 0.9] }],
        );
        assert!(matches!(err, Err(PolicyError::BadTable { .. })));
    }

    #[test]
    fn proportional_is_link_and_flow_monotone_on_reference() {
        let net = testnet::example1();
        let link = check_link_monotonicity(&net, &RoutingPolicy::Proportional, 50).unwrap();
        assert!(link.is_monotone(), "{:?}", link.witnesses.first());
        let flow = check_flow_monotonicity(&net, &RoutingPolicy::Proportional, 50).unwrap();
        assert!(flow.is_monotone(), "{:?}", flow.witnesses.first());
        assert!(link.comparisons > 0 && flow.comparisons > 0);
    }

    #[test]
    fn an_anti_monotone_table_fails_link_monotonicity() {
        // Three parallel links; when q3 dies, q1's share *drops* from 2/3 of
        // the inflow to 1/3. (With only two links a violation is impossible:
        // a singleton subset always carries the whole inflow.)
        let net = FlowNetwork::from_links(vec![
            Link::new("q1", 0, 1, 2.0),
            Link::new("q2", 0, 1, 2.0),
            Link::new("q3", 0, 1, 2.0),
        ])
        .unwrap();
        let mut table = TablePolicy::new();
        let mut put = |ids: &[&str], split: Vec<f64>| {
            let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            table
                .insert(&net, 0, &ids, vec![TableRow { mu: 3.0, split }])
                .unwrap();
        };
        put(&["q1", "q2", "q3"], vec![2.0, 0.5, 0.5]);
        put(&["q1", "q2"], vec![1.0, 2.0]);
        put(&["q1", "q3"], vec![1.5, 1.5]);
        put(&["q2", "q3"], vec![1.5, 1.5]);
        put(&["q1"], vec![3.0]);
        put(&["q2"], vec![3.0]);
        put(&["q3"], vec![3.0]);
        let policy = RoutingPolicy::Table(table);
        let report = check_link_monotonicity(&net, &policy, 4).unwrap();
        assert!(!report.is_monotone());
        let w = &report.witnesses[0];
        assert!(w.subset.len() < w.superset.len());
        assert!(w.shortfall > MONOTONICITY_TOL);
    }

    #[test]
    fn structural_analysis_proves_simple_shapes() {
        // Two transparent links from the origin.
        let pair = testnet::two_link(3.0, 4.0);
        let report = structural_flow_monotonicity(&pair).unwrap();
        assert!(report.proven);
        assert_eq!(report.nodes[0].verdict, NodeVerdict::TransparentPair);

        // A relay chain into a symmetric fan.
        let chain = FlowNetwork::from_links(vec![
            Link::new("a", 0, 1, 3.0),
            Link::new("b", 1, 2, 3.0),
            Link::new("c", 2, 3, 1.0),
            Link::new("d", 2, 3, 1.0),
        ])
        .unwrap();
        let report = structural_flow_monotonicity(&chain).unwrap();
        assert!(report.proven, "{:?}", report.nodes);
    }

    #[test]
    fn structural_analysis_flags_thin_subtrees() {
        // A wide link feeding a much thinner subtree is not transparent, and
        // pairing it with a thin sibling matches no safe pattern.
        let net = FlowNetwork::from_links(vec![
            Link::new("a", 0, 1, 5.0),
            Link::new("b", 0, 3, 1.0),
            Link::new("c", 1, 2, 0.5),
            Link::new("d", 1, 2, 0.4),
        ])
        .unwrap();
        let report = structural_flow_monotonicity(&net).unwrap();
        assert!(!report.proven);
        assert!(report
            .nodes
            .iter()
            .any(|n| n.node == 0 && n.verdict == NodeVerdict::Unknown));
    }
}
