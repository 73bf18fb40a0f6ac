//! Scenario files: a self-contained JSON description of a network, its
//! inflow, the routing policy, the disturbance to apply, and numeric
//! options. Shared by every subcommand.
//!
//! Nodes may be referred to by dense integer ids (0 = origin) or by string
//! names; named nodes are mapped to dense ids at load time with the unique
//! source becoming node 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cascade::dynamics::{DisturbanceSchedule, DynamicsError};
use cascade::network::NetworkError;
use cascade::resilience::bpa::ResilienceOracle;
use cascade::resilience::ResilienceError;
use cascade::routing::{PolicyError, RoutingPolicy, TablePolicy, TableRow};
use cascade::{FlowNetwork, Link};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error("named nodes need exactly one source; found {0:?}")]
    AmbiguousSource(Vec<String>),
    #[error("node name {0:?} is used as integer id elsewhere; use one style per file")]
    MixedNodeStyles(String),
    #[error("node {0:?} does not appear in the scenario")]
    UnknownNode(String),
}

impl ScenarioError {
    /// True for errors in the scenario itself (schema, graph shape,
    /// schedule validity) as opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            ScenarioError::Io(_) => false,
            ScenarioError::Schema(_) => true,
            ScenarioError::Network(_) => true,
            ScenarioError::Policy(_) => true,
            ScenarioError::AmbiguousSource(_) => true,
            ScenarioError::MixedNodeStyles(_) => true,
            ScenarioError::UnknownNode(_) => true,
            ScenarioError::Dynamics(e) => matches!(
                e,
                DynamicsError::Network(_)
                    | DynamicsError::DisturbanceAtTimeZero
                    | DynamicsError::InvalidDisturbance { .. }
                    | DynamicsError::DisturbanceExceedsCapacity { .. }
            ),
            ScenarioError::Resilience(e) => {
                matches!(e, ResilienceError::Network(_))
            }
        }
    }
}

/// A node reference in a scenario file: dense integer id or string name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub tail: NodeRef,
    pub head: NodeRef,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRowSpec {
    pub mu: f64,
    /// Shares aligned with the entry's `subset` order.
    pub split: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntrySpec {
    pub node: NodeRef,
    /// Link ids of the active subset this entry covers.
    pub subset: Vec<String>,
    pub rows: Vec<TableRowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoutingSpec {
    Proportional,
    Bpa {
        #[serde(skip_serializing_if = "Option::is_none")]
        grid: Option<usize>,
    },
    Table { entries: Vec<TableEntrySpec> },
}

impl Default for RoutingSpec {
    fn default() -> Self {
        RoutingSpec::Proportional
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Centralized,
    Bpa,
    Brute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntrySpec {
    pub t: u32,
    pub link: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    None,
    Schedule { entries: Vec<ScheduleEntrySpec> },
    Adversary { mode: AttackMode },
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec::None
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    /// Overload / settlement tolerance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Grid resolution for resilience curves and sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Hard cap on cascade steps; exceeding it is a runtime error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u32>,
    /// Link-count limit for the exhaustive attack search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_links: Option<usize>,
    /// Seed for randomized property suites.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Options after defaults are applied; echoed into output metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedOptions {
    pub tol: f64,
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u32>,
    pub max_links: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub edges: Vec<EdgeSpec>,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsSpec>,
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_str(&fs::read_to_string(path)?)
    }

    /// Applies defaults; `default_tol` comes from the environment override.
    pub fn resolve_options(&self, default_tol: f64) -> ResolvedOptions {
        let o = self.options.clone().unwrap_or_default();
        ResolvedOptions {
            tol: o.tol.unwrap_or(default_tol),
            grid: o.grid.unwrap_or(200),
            step_cap: o.step_cap,
            max_links: o.max_links.unwrap_or(12),
            seed: o.seed.unwrap_or(0),
        }
    }

    /// Maps node references to dense ids. Integer references are used
    /// as-is; names are assigned ids with the unique source first.
    fn node_map(&self) -> Result<BTreeMap<NodeRef, usize>, ScenarioError> {
        let mut map = BTreeMap::new();
        let any_name = self
            .edges
            .iter()
            .any(|e| matches!(e.tail, NodeRef::Name(_)) || matches!(e.head, NodeRef::Name(_)));
        if !any_name {
            for e in &self.edges {
                for r in [&e.tail, &e.head] {
                    if let NodeRef::Index(i) = r {
                        map.insert(r.clone(), *i);
                    }
                }
            }
            return Ok(map);
        }
        for e in &self.edges {
            for r in [&e.tail, &e.head] {
                if let NodeRef::Index(i) = r {
                    return Err(ScenarioError::MixedNodeStyles(i.to_string()));
                }
            }
        }
        // First-appearance order, sources = names never used as a head.
        let mut order: Vec<&NodeRef> = Vec::new();
        for e in &self.edges {
            for r in [&e.tail, &e.head] {
                if !order.contains(&r) {
                    order.push(r);
                }
            }
        }
        let heads: Vec<&NodeRef> = self.edges.iter().map(|e| &e.head).collect();
        let sources: Vec<&NodeRef> = order
            .iter()
            .copied()
            .filter(|r| !heads.contains(r))
            .collect();
        let [origin] = sources.as_slice() else {
            let names = sources
                .iter()
                .map(|r| match r {
                    NodeRef::Name(n) => n.clone(),
                    NodeRef::Index(i) => i.to_string(),
                })
                .collect();
            return Err(ScenarioError::AmbiguousSource(names));
        };
        map.insert((*origin).clone(), 0);
        let mut next = 1usize;
        for r in order {
            map.entry(r.clone()).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
        }
        Ok(map)
    }

    /// Builds and validates the network.
    pub fn network(&self) -> Result<FlowNetwork, ScenarioError> {
        let map = self.node_map()?;
        let links = self
            .edges
            .iter()
            .map(|e| Link::new(&e.id, map[&e.tail], map[&e.head], e.capacity))
            .collect();
        Ok(FlowNetwork::from_links(links)?)
    }

    /// Builds the routing policy, constructing the backward-propagation
    /// oracle when requested.
    pub fn policy(
        &self,
        net: &FlowNetwork,
        opts: &ResolvedOptions,
    ) -> Result<RoutingPolicy, ScenarioError> {
        match self.routing.clone().unwrap_or_default() {
            RoutingSpec::Proportional => Ok(RoutingPolicy::Proportional),
            RoutingSpec::Bpa { grid } => {
                let oracle =
                    ResilienceOracle::build_with_grid(net, grid.unwrap_or(opts.grid))?;
                Ok(RoutingPolicy::bpa(oracle))
            }
            RoutingSpec::Table { entries } => {
                let map = self.node_map()?;
                let mut table = TablePolicy::new();
                for entry in entries {
                    let node = map.get(&entry.node).copied().ok_or_else(|| {
                        ScenarioError::MixedNodeStyles(match &entry.node {
                            NodeRef::Name(n) => n.clone(),
                            NodeRef::Index(i) => i.to_string(),
                        })
                    })?;
                    let rows: Vec<TableRow> = entry
                        .rows
                        .iter()
                        .map(|r| TableRow { mu: r.mu, split: r.split.clone() })
                        .collect();
                    table.insert(net, node, &entry.subset, rows)?;
                }
                Ok(RoutingPolicy::Table(table))
            }
        }
    }

    /// The explicit schedule, if the disturbance is not adversary-driven.
    /// `None` disturbance yields an empty schedule.
    pub fn schedule(
        &self,
        net: &FlowNetwork,
    ) -> Result<Option<DisturbanceSchedule>, ScenarioError> {
        match self.disturbance.clone().unwrap_or_default() {
            DisturbanceSpec::None => Ok(Some(DisturbanceSchedule::new())),
            DisturbanceSpec::Schedule { entries } => {
                let mut schedule = DisturbanceSchedule::new();
                for entry in &entries {
                    let e = net.link_ix(&entry.link)?;
                    schedule.add(entry.t, e, entry.delta)?;
                }
                schedule.validate_against(net)?;
                Ok(Some(schedule))
            }
            DisturbanceSpec::Adversary { .. } => Ok(None),
        }
    }

    pub fn adversary_mode(&self) -> Option<AttackMode> {
        match self.disturbance.clone().unwrap_or_default() {
            DisturbanceSpec::Adversary { mode } => Some(mode),
            _ => None,
        }
    }

    /// Resolves a node given on the command line, accepting either the
    /// dense id or the name used in the file.
    pub fn resolve_node(&self, text: &str) -> Result<usize, ScenarioError> {
        let map = self.node_map()?;
        if let Ok(i) = text.parse::<usize>() {
            if map.contains_key(&NodeRef::Index(i)) {
                return Ok(i);
            }
        }
        map.get(&NodeRef::Name(text.to_string()))
            .copied()
            .ok_or_else(|| ScenarioError::UnknownNode(text.to_string()))
    }
}
