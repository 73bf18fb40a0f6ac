//! `cascade` — batch front end for cascading-failure analysis.
//!
//! Subcommands load a scenario file (network, inflow, routing, disturbance,
//! options) and emit JSON or CSV artifacts on stdout. Exit codes: 0 on
//! success, 1 when the scenario fails validation, 2 on runtime errors.
//! Computed verdicts (transferring or not, monotone or not) are data, never
//! exit codes.
//!
//! The `CASCADE_TOL` environment variable overrides the default overload
//! tolerance; per-scenario options override it in turn.

mod scenario;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cascade::adversary::{
    bpa_guided_attack, brute_force_attack, centralized_attack, AdversaryError, AttackPlan,
};
use cascade::dynamics::{run, InactivationCause, RunOptions};
use cascade::network::FlowNetwork;
use cascade::resilience::bpa::ResilienceOracle;
use cascade::resilience::centralized::{CentralizedOracle, MAX_LINKS};
use cascade::resilience::{simple_bounds, ResilienceError};
use cascade::routing::{
    check_flow_monotonicity, check_link_monotonicity, structural_flow_monotonicity,
    RoutingPolicy,
};
use scenario::{
    AttackMode, DisturbanceSpec, ResolvedOptions, Scenario, ScenarioError, ScheduleEntrySpec,
};

#[derive(Parser)]
#[command(
    name = "cascade",
    about = "Cascading-failure simulation, resilience bounds, and worst-case disturbances",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a scenario file: schema, graph shape, inflow feasibility,
    /// schedule validity. Emits a JSON report; exit 1 on any failure.
    Validate(ScenarioArg),
    /// Run the cascade described by the scenario and report the verdict.
    Simulate(SimulateArgs),
    /// Lower and upper bounds on the margin of resilience.
    Bounds(ScenarioArg),
    /// Synthesize a worst-case disturbance process.
    Attack(AttackArgs),
    /// Sweep a node's resilience curve or split components over inflow (CSV).
    Sweep(SweepArgs),
    /// Monotonicity checkers and randomized value-function property suites.
    Check(CheckArgs),
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file.
    scenario: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Write the full per-step trace as JSON to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the flow history as CSV (one row per time and link).
    #[arg(long)]
    flows: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    scenario: PathBuf,
    /// Construction to use; defaults to the scenario's adversary mode,
    /// then to `centralized`.
    #[arg(long, value_enum)]
    mode: Option<AttackMode>,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// Emit `mu,S` rows for this node's resilience curve.
    #[arg(long, conflicts_with = "policy_split")]
    node: Option<String>,
    /// Emit `mu,<link shares>` rows for this node's maximin split.
    #[arg(long)]
    policy_split: Option<String>,
    /// Number of grid rows (default: the scenario's grid option).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    scenario: PathBuf,
    /// Trials for the randomized value-function property suite.
    #[arg(long, default_value_t = 250)]
    trials: usize,
    /// Seed override for the randomized suite.
    #[arg(long)]
    seed: Option<u64>,
    /// Inflow grid steps for the monotonicity checkers.
    #[arg(long, default_value_t = 40)]
    steps: usize,
}

/// Errors mapped to exit codes.
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<AdversaryError> for CliError {
    fn from(e: AdversaryError) -> Self {
        match &e {
            AdversaryError::Network(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ResilienceError> for CliError {
    fn from(e: ResilienceError) -> Self {
        match &e {
            ResilienceError::Network(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Validate(a) => return cmd_validate(&a.scenario),
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Bounds(a) => cmd_bounds(&a.scenario),
        Cmd::Attack(a) => cmd_attack(&a),
        Cmd::Sweep(a) => cmd_sweep(&a),
        Cmd::Check(a) => cmd_check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Default tolerance: `CASCADE_TOL` if set, else the library default.
fn env_tol() -> Result<f64, CliError> {
    match std::env::var("CASCADE_TOL") {
        Err(_) => Ok(cascade::DEFAULT_TOL),
        Ok(text) => text.parse::<f64>().map_err(|_| {
            CliError::Runtime(format!("CASCADE_TOL is not a number: {text:?}"))
        }),
    }
}

struct Loaded {
    scenario: Scenario,
    net: FlowNetwork,
    opts: ResolvedOptions,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let scenario = Scenario::from_path(path)?;
    let opts = scenario.resolve_options(env_tol()?);
    let net = scenario.network()?;
    net.feasibility_check(scenario.lambda)
        .map_err(ScenarioError::Network)?;
    Ok(Loaded { scenario, net, opts })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    std::io::stdout().write_all(&out)?;
    Ok(())
}

/// Write-then-rename so partial files never appear under the target name.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct ValidationReport {
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    links: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    destinations: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_cut: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feasible: Option<bool>,
}

fn cmd_validate(path: &Path) -> ExitCode {
    let fail = |error: String| ValidationReport {
        valid: false,
        error: Some(error),
        nodes: None,
        links: None,
        destinations: None,
        lambda: None,
        min_cut: None,
        feasible: None,
    };
    let outcome = (|| -> Result<ValidationReport, ScenarioError> {
        let scenario = Scenario::from_path(path)?;
        let net = scenario.network()?;
        let opts = scenario.resolve_options(cascade::DEFAULT_TOL);
        let (_, min_cut) = net.min_cut();
        let feasible = net.feasibility_check(scenario.lambda).is_ok();
        // Policy tables and explicit schedules are part of the scenario;
        // broken ones make it invalid.
        scenario.policy(&net, &opts)?;
        scenario.schedule(&net)?;
        let mut report = ValidationReport {
            valid: feasible,
            error: None,
            nodes: Some(net.node_count()),
            links: Some(net.link_count()),
            destinations: Some(net.destinations().iter().copied().collect()),
            lambda: Some(scenario.lambda),
            min_cut: Some(min_cut),
            feasible: Some(feasible),
        };
        if !feasible {
            report.error = Some(
                net.feasibility_check(scenario.lambda)
                    .unwrap_err()
                    .to_string(),
            );
        }
        Ok(report)
    })();
    let report = match outcome {
        Ok(report) => report,
        // Scenario problems are data: reported in the JSON body, exit 1.
        Err(e) if e.is_validation() => fail(e.to_string()),
        // Everything else (unreadable files, solver failures) is a genuine
        // runtime error.
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let code = if report.valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    };
    match print_json(&report) {
        Ok(()) => code,
        Err(_) => ExitCode::from(2),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct InactivationOut {
    t: u32,
    link: String,
    cause: InactivationCause,
}

#[derive(Serialize)]
struct SimulateOut {
    transferring: bool,
    outflow: f64,
    settled_at: u32,
    origin_active: bool,
    /// Total magnitude of the applied disturbance.
    magnitude: f64,
    /// Links in inactivation order.
    inactivated: Vec<InactivationOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attack: Option<AttackPlan>,
    options: ResolvedOptions,
}

fn run_attack(
    mode: AttackMode,
    net: &FlowNetwork,
    policy: &RoutingPolicy,
    opts: &ResolvedOptions,
    lambda: f64,
) -> Result<AttackPlan, CliError> {
    Ok(match mode {
        AttackMode::Centralized => centralized_attack(net, policy, lambda)?,
        AttackMode::Bpa => {
            let oracle = ResilienceOracle::build_with_grid(net, opts.grid)?;
            bpa_guided_attack(net, policy, &oracle, lambda)?
        }
        AttackMode::Brute => brute_force_attack(net, policy, lambda, opts.max_links)?,
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let Loaded { scenario, net, opts } = load(&args.scenario)?;
    let policy = scenario.policy(&net, &opts)?;
    let (schedule, attack) = match scenario.schedule(&net)? {
        Some(schedule) => (schedule, None),
        None => {
            let mode = scenario.adversary_mode().expect("no schedule implies adversary");
            let plan = run_attack(mode, &net, &policy, &opts, scenario.lambda)?;
            let schedule = plan
                .schedule(&net)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            (schedule, Some(plan))
        }
    };
    let trace = run(
        &net,
        &policy,
        scenario.lambda,
        &schedule,
        RunOptions { tol: opts.tol, record: true },
    )
    .map_err(ScenarioError::Dynamics)?;
    if let Some(cap) = opts.step_cap {
        if trace.settled_at > cap {
            return Err(CliError::Runtime(format!(
                "cascade settled at step {} which exceeds the step cap {}",
                trace.settled_at, cap
            )));
        }
    }

    if let Some(path) = &args.trace {
        let mut bytes = serde_json::to_vec_pretty(&trace)
            .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
    }
    if let Some(path) = &args.flows {
        let mut bytes = Vec::new();
        cascade::dynamics::flow_history_csv(&trace, &mut bytes)
            .map_err(|e| CliError::Runtime(format!("csv export failed: {e}")))?;
        write_atomic(path, &bytes)?;
    }

    let inactivated = trace
        .steps
        .iter()
        .flat_map(|s| {
            s.inactivated_links
                .iter()
                .map(|(link, cause)| InactivationOut { t: s.t, link: link.clone(), cause: *cause })
        })
        .collect();
    print_json(&SimulateOut {
        transferring: trace.transferring,
        outflow: trace.outflow,
        settled_at: trace.settled_at,
        origin_active: trace.origin_active,
        magnitude: schedule.magnitude(),
        inactivated,
        attack,
        options: opts,
    })
}

// ---------------------------------------------------------------- bounds

#[derive(Serialize)]
struct BoundsOut {
    /// Any disturbance below this leaves the network transferring.
    lower: f64,
    /// Residual min-cut capacity: some disturbance at this level succeeds.
    upper_cut: f64,
    /// Exact margin of the best equilibrium rerouting (subset recursion);
    /// absent when the network exceeds the subset-recursion size limit.
    #[serde(rename = "S_centralized")]
    s_centralized: Option<f64>,
    /// Guaranteed margin of the backward-propagation policy.
    #[serde(rename = "S_bpa")]
    s_bpa: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    options: ResolvedOptions,
}

fn cmd_bounds(path: &Path) -> Result<(), CliError> {
    let Loaded { scenario, net, opts } = load(path)?;
    let policy = scenario.policy(&net, &opts)?;
    let bounds = simple_bounds(&net, &policy, scenario.lambda)?;
    let mut notes = Vec::new();
    let s_centralized = if net.link_count() <= MAX_LINKS {
        Some(CentralizedOracle::build(&net, scenario.lambda)?.resilience())
    } else {
        notes.push(format!(
            "subset recursion skipped: {} links exceed the {MAX_LINKS}-link limit",
            net.link_count()
        ));
        None
    };
    let oracle = ResilienceOracle::build_with_grid(&net, opts.grid)?;
    let s_bpa = oracle.s_star(scenario.lambda);
    if oracle.used_coarse_grid() {
        notes.push(
            "a node has out-degree above three; backward-propagation values are \
             bounds on a coarse grid"
                .into(),
        );
    }
    print_json(&BoundsOut {
        lower: bounds.lower,
        upper_cut: bounds.upper,
        s_centralized,
        s_bpa,
        notes,
        options: opts,
    })
}

// ---------------------------------------------------------------- attack

#[derive(Serialize)]
struct AttackOut {
    #[serde(flatten)]
    plan: AttackPlan,
    /// Scenario-compatible disturbance block replaying this plan.
    disturbance: DisturbanceSpec,
    options: ResolvedOptions,
}

fn cmd_attack(args: &AttackArgs) -> Result<(), CliError> {
    let Loaded { scenario, net, opts } = load(&args.scenario)?;
    let policy = scenario.policy(&net, &opts)?;
    let mode = args
        .mode
        .or_else(|| scenario.adversary_mode())
        .unwrap_or(AttackMode::Centralized);
    let plan = run_attack(mode, &net, &policy, &opts, scenario.lambda)?;
    let disturbance = DisturbanceSpec::Schedule {
        entries: plan
            .entries
            .iter()
            .map(|e| ScheduleEntrySpec { t: e.t, link: e.link.clone(), delta: e.delta })
            .collect(),
    };
    print_json(&AttackOut { plan, disturbance, options: opts })
}

// ---------------------------------------------------------------- sweep

fn csv_num(x: f64) -> String {
    // Shortest round-trip formatting; integral values keep a trailing ".0"
    // so columns stay typed as floats.
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let Loaded { scenario, net, opts } = load(&args.scenario)?;
    let steps = args.steps.unwrap_or(opts.grid).max(1);
    let oracle = ResilienceOracle::build_with_grid(&net, opts.grid)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    match (&args.node, &args.policy_split) {
        (Some(node), None) => {
            let v = scenario.resolve_node(node)?;
            let links = net.out_links(v);
            if links.is_empty() {
                return Err(CliError::Validation(format!(
                    "node {node} is a destination; it has no resilience curve"
                )));
            }
            let total: f64 = links.iter().map(|&e| net.link(e).capacity).sum();
            writeln!(out, "mu,S")?;
            for i in 0..=steps {
                let mu = total * i as f64 / steps as f64;
                let r = vec![0.0; links.len()];
                let s = oracle.s_value(v, links, &r, mu);
                writeln!(out, "{},{}", csv_num(mu), csv_num(s))?;
            }
        }
        (None, Some(node)) => {
            let v = scenario.resolve_node(node)?;
            let links: Vec<_> = net.out_links(v).to_vec();
            if links.is_empty() {
                return Err(CliError::Validation(format!(
                    "node {node} is a destination; it has no split"
                )));
            }
            let ids: Vec<String> = links.iter().map(|&e| net.link(e).id.clone()).collect();
            let total: f64 = links.iter().map(|&e| net.link(e).capacity).sum();
            writeln!(out, "mu,{}", ids.join(","))?;
            for i in 0..=steps {
                let mu = total * i as f64 / steps as f64;
                let r = vec![0.0; links.len()];
                let split = oracle
                    .g_split(v, &links, &r, mu)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                let row: Vec<String> = split.iter().map(|&x| csv_num(x)).collect();
                writeln!(out, "{},{}", csv_num(mu), row.join(","))?;
            }
        }
        _ => {
            return Err(CliError::Validation(
                "sweep needs exactly one of --node or --policy-split".into(),
            ))
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- check

#[derive(Serialize)]
struct CheckOut {
    link_monotone: bool,
    flow_monotone: bool,
    link_witnesses: u64,
    flow_witnesses: u64,
    /// First few witnesses of each kind, for inspection.
    link_examples: serde_json::Value,
    flow_examples: serde_json::Value,
    /// Structural proof outcome; null when the expanded network is not a
    /// tree (the structural argument does not apply).
    structural: Option<cascade::routing::StructuralReport>,
    properties: cascade::resilience::properties::PropertyReport,
    options: ResolvedOptions,
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let Loaded { scenario, net, mut opts } = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }
    let policy = scenario.policy(&net, &opts)?;
    let link = check_link_monotonicity(&net, &policy, args.steps)
        .map_err(ScenarioError::Policy)?;
    let flow = check_flow_monotonicity(&net, &policy, args.steps)
        .map_err(ScenarioError::Policy)?;
    let structural = match structural_flow_monotonicity(&net) {
        Ok(report) => Some(report),
        Err(ResilienceError::Network(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let oracle = ResilienceOracle::build_with_grid(&net, opts.grid)?;
    let properties =
        cascade::resilience::properties::check_s_properties(&oracle, args.trials, opts.seed)?;

    let sample = |v: serde_json::Value| match v {
        serde_json::Value::Array(mut items) => {
            items.truncate(5);
            serde_json::Value::Array(items)
        }
        other => other,
    };
    print_json(&CheckOut {
        link_monotone: link.is_monotone(),
        flow_monotone: flow.is_monotone(),
        link_witnesses: link.violations,
        flow_witnesses: flow.violations,
        link_examples: sample(
            serde_json::to_value(&link.witnesses)
                .map_err(|e| CliError::Runtime(e.to_string()))?,
        ),
        flow_examples: sample(
            serde_json::to_value(&flow.witnesses)
                .map_err(|e| CliError::Runtime(e.to_string()))?,
        ),
        structural,
        properties,
        options: opts,
    })
}
