//! Shared unit-test fixtures.
//!
//! The workhorse is a ten-link, eight-node network with two routes out of the
//! origin: a long branch `0 -> 1 -> {3, 4}` whose sub-branches rejoin the
//! destination through nodes 5 and 6, and a short branch `0 -> 2 -> 7`. Two
//! capacity profiles are used throughout the test-suite: profile A has
//! generous side capacities and inflow 4, profile B runs much closer to its
//! bottlenecks with inflow 2.

use crate::network::{FlowNetwork, Link};

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

/// Inflow used with [`example1`].
pub const EX1_LAMBDA: f64 = 4.0;

/// Capacity profile A: generous side capacities, bottleneck on link `e8`.
pub fn example1() -> FlowNetwork {
    ten_link([4.0, 4.0, 3.0, 3.0, 1.5, 3.0, 3.0, 0.75, 1.5, 3.0])
}

/// Inflow used with [`example2`].
pub const EX2_LAMBDA: f64 = 2.0;

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
