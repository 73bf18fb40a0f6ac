//! Shared fixtures and random-network generators for the integration suites.
//!
//! The fixed fixtures mirror the two capacity profiles of the ten-link
//! reference network used across the crate's documentation and scenario
//! files, plus the two-parallel-link network whose margin has a closed form.
//! The generators produce seeded random DAGs (for the adversary and
//! monotonicity sweeps) and random trees built only from structurally
//! flow-monotone patterns (for the tightness checks).

#![allow(dead_code)]

use cascade::network::{FlowNetwork, Link};
use cascade::routing::structural_flow_monotonicity;
use rand::Rng;

/// Inflow used with [`example1`].
pub const EX1_LAMBDA: f64 = 4.0;
/// Inflow used with [`example2`].
pub const EX2_LAMBDA: f64 = 2.0;

/// Builds the ten-link topology with the given capacities for links
/// `e1..e10` in order.
pub fn ten_link(caps: [f64; 10]) -> FlowNetwork {
    let links = vec![
        Link::new("e1", 0, 1, caps[0]),
        Link::new("e2", 0, 2, caps[1]),
        Link::new("e3", 1, 3, caps[2]),
        Link::new("e4", 1, 4, caps[3]),
        Link::new("e5", 3, 7, caps[4]),
        Link::new("e6", 4, 5, caps[5]),
        Link::new("e7", 4, 6, caps[6]),
        Link::new("e8", 5, 7, caps[7]),
        Link::new("e9", 6, 7, caps[8]),
        Link::new("e10", 2, 7, caps[9]),
    ];
    FlowNetwork::from_links(links).unwrap()
}

/// Capacity profile A: generous side capacities, bottleneck on link `e8`.
pub fn example1() -> FlowNetwork {
    ten_link([4.0, 4.0, 3.0, 3.0, 1.5, 3.0, 3.0, 0.75, 1.5, 3.0])
}

/// Capacity profile B: thin side links (`e5`, `e6`, `e10`), inflow close to
/// several cut capacities.
pub fn example2() -> FlowNetwork {
    ten_link([2.5, 3.0, 3.0, 2.0, 0.6, 0.6, 2.0, 0.75, 1.5, 0.17])
}

/// Two parallel origin-to-destination links with the given capacities.
pub fn two_link(c1: f64, c2: f64) -> FlowNetwork {
    FlowNetwork::from_links(vec![
        Link::new("p1", 0, 1, c1),
        Link::new("p2", 0, 1, c2),
    ])
    .unwrap()
}

/// Random feasible DAG with at most 8 nodes, at most 10 links and
/// out-degree at most 3, together with an inflow strictly inside the
/// feasible range (between 30% and 70% of the min-cut capacity).
///
/// Construction: nodes `0..n` with every link pointing from a lower to a
/// higher index (so the graph is acyclic by construction), one spanning
/// in-link per non-origin node (so nobody but the origin is source-like and
/// everyone is reachable), plus random extra links. Nodes without outgoing
/// links are destinations.
pub fn random_dag(rng: &mut impl Rng) -> (FlowNetwork, f64) {
    loop {
        let n = rng.gen_range(3..=8usize);
        let mut out_deg = vec![0usize; n];
        let mut ends: Vec<(usize, usize)> = Vec::new();
        for v in 1..n {
            let candidates: Vec<usize> = (0..v).filter(|&u| out_deg[u] < 3).collect();
            let u = candidates[rng.gen_range(0..candidates.len())];
            out_deg[u] += 1;
            ends.push((u, v));
        }
        let extra = rng.gen_range(0..=10 - (n - 1));
        for _ in 0..extra {
            let candidates: Vec<usize> = (0..n - 1).filter(|&u| out_deg[u] < 3).collect();
            if candidates.is_empty() {
                break;
            }
            let u = candidates[rng.gen_range(0..candidates.len())];
            let v = rng.gen_range(u + 1..n);
            out_deg[u] += 1;
            ends.push((u, v));
        }
        let links: Vec<Link> = ends
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Link::new(format!("e{}", i + 1), u, v, rng.gen_range(0.5..4.0)))
            .collect();
        let Ok(net) = FlowNetwork::from_links(links) else { continue };
        let (_, cut) = net.min_cut();
        let lambda = cut * rng.gen_range(0.3..0.7);
        if lambda > 1e-6 && net.feasibility_check(lambda).is_ok() {
            return (net, lambda);
        }
    }
}

/// Random tree built only from patterns the structural flow-monotonicity
/// analysis can prove: relay chains, pairs of transparent chains, bundles of
/// identical chains, and a wide transparent link covering a branch into a
/// transparent pair. Every returned tree has 3..=7 links, out-degree at most
/// 3, and `structural_flow_monotonicity` returns `proven == true` for it.
/// The inflow sits between 35% and 65% of the min-cut capacity.
pub fn random_safe_tree(rng: &mut impl Rng) -> (FlowNetwork, f64) {
    // A chain of links hanging under `parent`, one per capacity in `caps`,
    // ending at a fresh leaf (a destination).
    fn chain(ends: &mut Vec<(usize, usize, f64)>, next: &mut usize, parent: usize, caps: &[f64]) {
        let mut tail = parent;
        for &c in caps {
            ends.push((tail, *next, c));
            tail = *next;
            *next += 1;
        }
    }
    fn cap(rng: &mut impl Rng) -> f64 {
        rng.gen_range(0.5..3.5)
    }

    loop {
        let mut ends: Vec<(usize, usize, f64)> = Vec::new();
        let mut next = 1usize;

        // Optionally put a relay between the origin and the branching node.
        let mut parent = 0usize;
        let prefix = rng.gen_bool(0.3);

        let pattern = rng.gen_range(0..4u8);
        let mut body: Vec<Vec<f64>> = Vec::new();
        match pattern {
            // Two transparent chains with independent capacities.
            0 => {
                for _ in 0..2 {
                    let len = rng.gen_range(1..=2usize);
                    body.push((0..len).map(|_| cap(rng)).collect());
                }
            }
            // Two or three identical chains: a symmetric subtree.
            1 => {
                let k = rng.gen_range(2..=3usize);
                let len = rng.gen_range(1..=2usize);
                let caps: Vec<f64> = (0..len).map(|_| cap(rng)).collect();
                for _ in 0..k {
                    body.push(caps.clone());
                }
            }
            // A wide direct link covering a branch into a transparent pair.
            2 => {
                let narrow = rng.gen_range(0.5..2.5);
                let wide = narrow + rng.gen_range(0.05..1.0);
                body.push(vec![wide]);
                // Placeholder; the covered branch is attached below.
                body.push(vec![narrow]);
            }
            // Two transparent chains of length two.
            _ => {
                for _ in 0..2 {
                    body.push(vec![cap(rng), cap(rng)]);
                }
            }
        }

        if prefix {
            let c = cap(rng);
            chain(&mut ends, &mut next, parent, &[c]);
            parent = next - 1;
        }
        if pattern == 2 {
            // Side A: direct transparent link to a destination.
            chain(&mut ends, &mut next, parent, &body[0]);
            // Side B: link into a node that is itself a transparent pair.
            let b = next;
            ends.push((parent, b, body[1][0]));
            next += 1;
            let (c1, c2) = (cap(rng), cap(rng));
            chain(&mut ends, &mut next, b, &[c1]);
            chain(&mut ends, &mut next, b, &[c2]);
        } else {
            for caps in &body {
                chain(&mut ends, &mut next, parent, caps);
            }
        }

        if !(3..=7).contains(&ends.len()) {
            continue;
        }
        let links: Vec<Link> = ends
            .iter()
            .enumerate()
            .map(|(i, &(u, v, c))| Link::new(format!("e{}", i + 1), u, v, c))
            .collect();
        let Ok(net) = FlowNetwork::from_links(links) else { continue };
        let report = structural_flow_monotonicity(&net).expect("generated networks are trees");
        if !report.proven {
            continue;
        }
        let (_, cut) = net.min_cut();
        let lambda = cut * rng.gen_range(0.35..0.65);
        if lambda > 1e-6 && net.feasibility_check(lambda).is_ok() {
            return (net, lambda);
        }
    }
}
