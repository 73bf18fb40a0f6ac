//! Acceptance suite: one test per release criterion, each printing a single
//! `acceptance criterion N: PASS/FAIL` line (visible with `--nocapture`, and
//! in the captured output of any failing test).
//!
//! Known limitations are asserted as stated rather than weakened, so a
//! failing line here means "the implementation does not reproduce the
//! published value", not "the implementation is internally inconsistent".
//! The rationale for each such gap is spelled out in the assertion message.

mod common;

use std::time::{Duration, Instant};

use cascade::adversary::{
    bpa_guided_attack, brute_force_margin, random_schedule, AttackConstruction,
};
use cascade::dynamics::{run, DisturbanceSchedule, RunOptions};
use cascade::network::FlowNetwork;
use cascade::resilience::bpa::ResilienceOracle;
use cascade::resilience::centralized::CentralizedOracle;
use cascade::resilience::closed_form::{two_link_margin, two_link_split};
use cascade::resilience::properties::check_s_properties;
use cascade::resilience::simple_bounds;
use cascade::routing::{check_flow_monotonicity, check_link_monotonicity};
use cascade::RoutingPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{example1, example2, random_dag, random_safe_tree, two_link, EX1_LAMBDA, EX2_LAMBDA};

/// Exactness tolerance for values the dynamics must reproduce digit-for-digit.
const EXACT_TOL: f64 = 1e-9;
/// Tolerance for the centralized recursion value on the first example.
const CENTRALIZED_TOL: f64 = 0.02;
/// Tolerance for the two-link closed-form comparison.
const CLOSED_FORM_TOL: f64 = 1e-3;
/// Tolerance for the second example's headline margin and splits.
const EXAMPLE2_TOL: f64 = 0.01;
/// Attack-bound slack for the guided-attack suite, as a fraction of inflow.
const ATTACK_SLACK: f64 = 0.02;
/// Bracket width for the tree tightness suite, as a fraction of inflow.
const TREE_SLACK: f64 = 0.03;

fn report(criterion: u32, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("acceptance criterion {criterion:>2}: PASS — {detail}");
    } else {
        println!(
            "acceptance criterion {criterion:>2}: FAIL — {}",
            failures.join("; ")
        );
    }
    assert!(
        failures.is_empty(),
        "criterion {criterion}: {}",
        failures.join("; ")
    );
}

fn push_if(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

/// Inactivation order (link ids) across a whole trace.
fn inactivation_order(trace: &cascade::CascadeTrace) -> Vec<String> {
    trace
        .steps
        .iter()
        .flat_map(|s| s.inactivated_links.iter().map(|(id, _)| id.clone()))
        .collect()
}

#[test]
fn criterion_01_first_example_cascade_regression() {
    let mut failures = Vec::new();
    let net = example1();
    let policy = RoutingPolicy::Proportional;
    let mut schedule = DisturbanceSchedule::new();
    schedule
        .add(1, net.link_ix("e5").unwrap(), 0.55)
        .unwrap();

    let started = Instant::now();
    let trace = run(&net, &policy, EX1_LAMBDA, &schedule, RunOptions::default()).unwrap();
    let elapsed = started.elapsed();

    // Initial equilibrium flows under proportional routing, exact.
    let expected = [
        ("e1", 2.0),
        ("e2", 2.0),
        ("e3", 1.0),
        ("e4", 1.0),
        ("e5", 1.0),
        ("e6", 0.5),
        ("e7", 0.5),
        ("e8", 0.5),
        ("e9", 0.5),
        ("e10", 2.0),
    ];
    let initial = &trace.steps[0].flows;
    for (id, want) in expected {
        let got = initial[id];
        push_if(
            &mut failures,
            (got - want).abs() <= EXACT_TOL,
            format!("initial flow {id}: got {got}, want {want}"),
        );
    }

    // Published inactivation order. The computed cascade reproduces the first
    // eight entries and the exact inactivation times of every link, but the
    // overloads of e2 (t=21) and e10 (t=22) land in the opposite order from
    // the published tail (…, e1, e10, e2): with flows kept exactly rational,
    // e2 reaches its capacity one step before e10. The published order is
    // asserted as stated.
    let want_order = ["e5", "e3", "e8", "e6", "e9", "e7", "e4", "e1", "e10", "e2"];
    let got_order = inactivation_order(&trace);
    push_if(
        &mut failures,
        got_order.iter().map(String::as_str).eq(want_order.iter().copied()),
        format!("inactivation order: got {got_order:?}, want {want_order:?}"),
    );

    push_if(
        &mut failures,
        !trace.transferring,
        "expected the cascade to end not transferring".into(),
    );
    push_if(
        &mut failures,
        elapsed < Duration::from_secs(1),
        format!("runtime {elapsed:?} exceeded 1 s"),
    );
    report(
        1,
        &failures,
        &format!(
            "initial flows exact, not transferring, settled at t={} in {elapsed:?}",
            trace.settled_at
        ),
    );
}

#[test]
fn criterion_02_simple_bounds_on_first_example() {
    let mut failures = Vec::new();
    let bounds = simple_bounds(&example1(), &RoutingPolicy::Proportional, EX1_LAMBDA).unwrap();
    push_if(
        &mut failures,
        (bounds.lower - 0.25).abs() <= EXACT_TOL,
        format!("lower bound: got {}, want 0.25", bounds.lower),
    );
    push_if(
        &mut failures,
        (bounds.upper - 2.75).abs() <= EXACT_TOL,
        format!("upper bound: got {}, want 2.75", bounds.upper),
    );
    report(
        2,
        &failures,
        &format!("lower {} / upper {}", bounds.lower, bounds.upper),
    );
}

#[test]
fn criterion_03_centralized_recursion_on_first_example() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let oracle = CentralizedOracle::build(&example1(), EX1_LAMBDA).unwrap();
    let value = oracle.resilience();
    let elapsed = started.elapsed();
    push_if(
        &mut failures,
        (value - 1.14).abs() <= CENTRALIZED_TOL,
        format!("centralized value: got {value}, want 1.14 ± {CENTRALIZED_TOL}"),
    );
    push_if(
        &mut failures,
        elapsed < Duration::from_secs(60),
        format!("runtime {elapsed:?} exceeded 60 s"),
    );
    report(3, &failures, &format!("value {value:.10} in {elapsed:?}"));
}

#[test]
fn criterion_04_two_link_closed_forms() {
    let mut failures = Vec::new();
    let (c1, c2) = (10.0, 14.0);
    let net = two_link(c1, c2);
    let oracle = ResilienceOracle::build(&net).unwrap();
    let out: Vec<_> = net.out_links(0).to_vec();
    let r = [0.0, 0.0];

    let mut worst_margin = 0.0f64;
    let mut worst_split = 0.0f64;
    for i in 0..=400 {
        let mu = (c1 + c2) * i as f64 / 400.0;
        let margin = oracle.s_value(0, &out, &r, mu);
        let want = two_link_margin(c1, c2, mu);
        worst_margin = worst_margin.max((margin - want).abs());
        let split = oracle.g_split(0, &out, &r, mu).unwrap();
        let (x1, _) = two_link_split(c1, c2, mu);
        worst_split = worst_split.max((split[0] - x1).abs());
    }
    push_if(
        &mut failures,
        worst_margin <= CLOSED_FORM_TOL,
        format!("margin curve off by {worst_margin} (> {CLOSED_FORM_TOL})"),
    );
    push_if(
        &mut failures,
        worst_split <= CLOSED_FORM_TOL,
        format!("split curve off by {worst_split} (> {CLOSED_FORM_TOL})"),
    );

    // Spot anchors from the printed curves.
    let anchor_margin = oracle.s_value(0, &out, &r, 4.0);
    push_if(
        &mut failures,
        (anchor_margin - 18.0).abs() <= CLOSED_FORM_TOL,
        format!("margin at inflow 4: got {anchor_margin}, want 18"),
    );
    let anchor_split = oracle.g_split(0, &out, &r, 12.0).unwrap();
    push_if(
        &mut failures,
        (anchor_split[0] - 5.0).abs() <= CLOSED_FORM_TOL,
        format!("thin-link share at inflow 12: got {}, want 5", anchor_split[0]),
    );
    report(
        4,
        &failures,
        &format!(
            "401 grid points; worst margin error {worst_margin:.2e}, worst split error {worst_split:.2e}"
        ),
    );
}

#[test]
fn criterion_05_second_example_regression() {
    let mut failures = Vec::new();
    let net = example2();
    let oracle = ResilienceOracle::build_with_grid(&net, 200).unwrap();

    let s_star = oracle.s_star(EX2_LAMBDA);
    push_if(
        &mut failures,
        (s_star - 0.3).abs() <= EXAMPLE2_TOL,
        format!("margin: got {s_star}, want 0.3 ± {EXAMPLE2_TOL}"),
    );

    // Node-1 split of its arriving flow between e3 and e4.
    let out1: Vec<_> = net.out_links(1).to_vec();
    let r1 = [0.0, 0.0];
    let x3_at_19 = oracle.g_split(1, &out1, &r1, 1.9).unwrap()[0];
    push_if(
        &mut failures,
        (x3_at_19 - 0.40).abs() <= EXAMPLE2_TOL,
        format!("share on e3 at inflow 1.9: got {x3_at_19}, want 0.40 ± {EXAMPLE2_TOL}"),
    );
    // Published as 0.35; the exact optimizer value at inflow 2.0 is
    // 11/30 = 0.3667 (the published number reads off a plotted curve).
    // Asserted as published.
    let x3_at_20 = oracle.g_split(1, &out1, &r1, 2.0).unwrap()[0];
    push_if(
        &mut failures,
        (x3_at_20 - 0.35).abs() <= EXAMPLE2_TOL,
        format!("share on e3 at inflow 2.0: got {x3_at_20}, want 0.35 ± {EXAMPLE2_TOL}"),
    );

    // The published 0.27-magnitude attack: 0.2 off e5 and 0.07 off e10 at
    // t=1. Under the exactly-computed equilibrium (origin split 1.8980952,
    // not the plotted 1.9) the residual on e5 is 0.2004762, so the 0.2 hit
    // leaves e5 alive by 4.76e-4 and the network stays transferring; raising
    // the two reductions to the exact residuals (total 0.2685714 < 0.27)
    // does make it not transferring. Asserted as published.
    let policy = RoutingPolicy::bpa(ResilienceOracle::build_with_grid(&net, 200).unwrap());
    let mut attack = DisturbanceSchedule::new();
    attack.add(1, net.link_ix("e5").unwrap(), 0.2).unwrap();
    attack.add(1, net.link_ix("e10").unwrap(), 0.07).unwrap();
    let trace = run(&net, &policy, EX2_LAMBDA, &attack, RunOptions::default()).unwrap();
    push_if(
        &mut failures,
        !trace.transferring,
        format!(
            "published 0.27 attack: expected not transferring, got transferring \
             (settled outflow {})",
            trace.outflow
        ),
    );
    let mut exact = DisturbanceSchedule::new();
    exact
        .add(1, net.link_ix("e5").unwrap(), 0.2004762)
        .unwrap();
    exact
        .add(1, net.link_ix("e10").unwrap(), 0.0680953)
        .unwrap();
    let exact_trace = run(&net, &policy, EX2_LAMBDA, &exact, RunOptions::default()).unwrap();
    push_if(
        &mut failures,
        !exact_trace.transferring,
        "exact-residual 0.2686 attack unexpectedly left the network transferring".into(),
    );

    // Flow monotonicity fails for this profile: the checker must produce a
    // witness for node 1 inside the inflow window [1.9, 2.0]. A 25-step grid
    // over the node's inflow range [0, 2.5] samples 1.9 and 2.0 exactly and
    // keeps the violation count below the witness-recording cap.
    let flow_report = check_flow_monotonicity(&net, &policy, 25).unwrap();
    let witness_in_window = flow_report.witnesses.iter().any(|w| {
        w.node == 1 && w.link == "e3" && w.mu_low >= 1.9 - 1e-6 && w.mu_high <= 2.0 + 1e-6
    });
    push_if(
        &mut failures,
        !flow_report.is_monotone() && witness_in_window,
        format!(
            "expected a flow-monotonicity witness for e3 within [1.9, 2.0]; \
             violations={} witnesses={}",
            flow_report.violations,
            flow_report.witnesses.len()
        ),
    );
    report(
        5,
        &failures,
        &format!(
            "margin {s_star:.7}, e3 share {x3_at_19:.4}@1.9 / {x3_at_20:.4}@2.0, \
             flow-monotonicity violations {}",
            flow_report.violations
        ),
    );
}

#[test]
fn criterion_06_guided_attack_bound_on_random_dags() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut checked = 0usize;
    for case in 0..50 {
        let (net, lambda) = random_dag(&mut rng);
        let oracle = ResilienceOracle::build(&net).unwrap();
        let s_star = oracle.s_star(lambda);
        let policies = [
            ("proportional", RoutingPolicy::Proportional),
            (
                "bpa",
                RoutingPolicy::bpa(ResilienceOracle::build(&net).unwrap()),
            ),
        ];
        for (name, policy) in policies {
            let plan = match bpa_guided_attack(&net, &policy, &oracle, lambda) {
                Ok(plan) => plan,
                Err(err) => {
                    failures.push(format!(
                        "case {case} ({name}, {} links, inflow {lambda:.3}): \
                         construction failed: {err}",
                        net.link_count()
                    ));
                    continue;
                }
            };
            // Replayable: rebuilding the schedule from the emitted entries
            // must reproduce the stated verdict and magnitude.
            let trace = plan
                .replay(&net, &policy, lambda, RunOptions { record: false, ..Default::default() })
                .unwrap();
            push_if(
                &mut failures,
                !trace.transferring,
                format!("case {case} ({name}): replay still transferring"),
            );
            let total: f64 = plan.entries.iter().map(|e| e.delta).sum();
            push_if(
                &mut failures,
                (total - plan.magnitude).abs() <= 1e-9,
                format!(
                    "case {case} ({name}): entries sum {total} != magnitude {}",
                    plan.magnitude
                ),
            );
            push_if(
                &mut failures,
                plan.magnitude <= s_star + ATTACK_SLACK * lambda,
                format!(
                    "case {case} ({name}): magnitude {} exceeds bound {} + {}",
                    plan.magnitude,
                    s_star,
                    ATTACK_SLACK * lambda
                ),
            );
            checked += 1;
        }
        if failures.len() > 8 {
            break;
        }
    }
    let elapsed = started.elapsed();
    push_if(
        &mut failures,
        elapsed < Duration::from_secs(300),
        format!("runtime {elapsed:?} exceeded 5 min"),
    );
    report(
        6,
        &failures,
        &format!("{checked} guided attacks within bound in {elapsed:?}"),
    );
}

#[test]
fn criterion_07_tree_bracket_tightness() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let started = Instant::now();
    let mut schedules_run = 0usize;
    for case in 0..20 {
        let (net, lambda) = random_safe_tree(&mut rng);
        let oracle = ResilienceOracle::build(&net).unwrap();
        let s_star = oracle.s_star(lambda);
        let policy = RoutingPolicy::bpa(ResilienceOracle::build(&net).unwrap());
        let margin = brute_force_margin(&net, &policy, lambda, net.link_count()).unwrap();
        push_if(
            &mut failures,
            (margin - s_star).abs() <= TREE_SLACK * lambda,
            format!(
                "case {case} ({} links, inflow {lambda:.3}): exhaustive margin {margin} \
                 vs predicted {s_star} (slack {})",
                net.link_count(),
                TREE_SLACK * lambda
            ),
        );

        // Any schedule strictly below the bracket must leave the network
        // transferring.
        let floor = s_star - TREE_SLACK * lambda;
        if floor <= 1e-6 {
            failures.push(format!(
                "case {case}: bracket floor {floor} not positive; generator produced \
                 a degenerate tree"
            ));
            continue;
        }
        for trial in 0..200 {
            let frac = 0.05 + 0.949 * (trial as f64 / 199.0);
            let schedule = random_schedule(&net, floor * frac, 12, &mut rng);
            let trace = run(
                &net,
                &policy,
                lambda,
                &schedule,
                RunOptions { record: false, ..Default::default() },
            )
            .unwrap();
            schedules_run += 1;
            if trace.transferring {
                continue;
            }
            failures.push(format!(
                "case {case} trial {trial}: schedule of magnitude {} (< floor {floor}) \
                 broke transfer",
                schedule.magnitude()
            ));
            break;
        }
        if failures.len() > 8 {
            break;
        }
    }
    let elapsed = started.elapsed();
    report(
        7,
        &failures,
        &format!("20 trees bracketed, {schedules_run} sub-bracket schedules in {elapsed:?}"),
    );
}

#[test]
fn criterion_08_transfer_dichotomy_on_all_traces() {
    let mut failures = Vec::new();
    let mut traces = 0usize;

    let mut check = |trace: &cascade::CascadeTrace, what: &str, failures: &mut Vec<String>| {
        traces += 1;
        if let Err(violation) = trace.check_transfer_dichotomy(1e-9) {
            failures.push(format!("{what}: {violation}"));
        }
    };

    // Canonical fixtures.
    let net1 = example1();
    let mut schedule = DisturbanceSchedule::new();
    schedule.add(1, net1.link_ix("e5").unwrap(), 0.55).unwrap();
    let trace = run(
        &net1,
        &RoutingPolicy::Proportional,
        EX1_LAMBDA,
        &schedule,
        RunOptions::default(),
    )
    .unwrap();
    check(&trace, "first example cascade", &mut failures);

    let net2 = example2();
    let policy2 = RoutingPolicy::bpa(ResilienceOracle::build_with_grid(&net2, 200).unwrap());
    let mut attack = DisturbanceSchedule::new();
    attack.add(1, net2.link_ix("e5").unwrap(), 0.21).unwrap();
    attack.add(1, net2.link_ix("e10").unwrap(), 0.07).unwrap();
    let trace = run(&net2, &policy2, EX2_LAMBDA, &attack, RunOptions::default()).unwrap();
    check(&trace, "second example attack", &mut failures);

    // Random sweeps: both policies, disturbed and undisturbed runs.
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    for case in 0..30 {
        let (net, lambda) = random_dag(&mut rng);
        let policies = [
            ("proportional", RoutingPolicy::Proportional),
            (
                "bpa",
                RoutingPolicy::bpa(ResilienceOracle::build(&net).unwrap()),
            ),
        ];
        for (name, policy) in policies {
            for round in 0..3 {
                let budget = net.total_capacity() * (0.1 + 0.4 * round as f64);
                let schedule = random_schedule(&net, budget, 10, &mut rng);
                let trace = run(&net, &policy, lambda, &schedule, RunOptions::default()).unwrap();
                check(
                    &trace,
                    &format!("random case {case} ({name}, round {round})"),
                    &mut failures,
                );
            }
        }
    }
    report(
        8,
        &failures,
        &format!("{traces} traces, outflow always 0 or the inflow, verdict matches origin"),
    );
}

#[test]
fn criterion_09_randomized_value_function_laws() {
    let mut failures = Vec::new();
    let mut assertions = 0u64;
    let nets: Vec<(&str, FlowNetwork)> = vec![
        ("profile A", example1()),
        ("profile B", example2()),
        ("two-link", two_link(10.0, 14.0)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let mut extra: Vec<(String, FlowNetwork)> = Vec::new();
    for i in 0..4 {
        let (net, _) = random_dag(&mut rng);
        extra.push((format!("random {i}"), net));
    }
    let mut seed = 9000u64;
    for (name, net) in nets
        .iter()
        .map(|(n, net)| (n.to_string(), net))
        .chain(extra.iter().map(|(n, net)| (n.clone(), net)))
    {
        let oracle = ResilienceOracle::build(net).unwrap();
        let reportv = check_s_properties(&oracle, 30, seed).unwrap();
        seed += 1;
        assertions += reportv.assertions;
        for f in &reportv.failures {
            failures.push(format!("{name}: {f:?}"));
        }
    }
    push_if(
        &mut failures,
        assertions >= 1000,
        format!("only {assertions} randomized assertions (need ≥ 1000)"),
    );
    report(
        9,
        &failures,
        &format!("{assertions} randomized assertions, zero failures"),
    );
}

#[test]
fn criterion_10_link_monotonicity_both_policies() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut nets: Vec<(String, FlowNetwork)> = vec![
        ("profile A".into(), example1()),
        ("profile B".into(), example2()),
        ("two-link".into(), two_link(10.0, 14.0)),
    ];
    for i in 0..8 {
        let (net, _) = random_dag(&mut rng);
        nets.push((format!("random dag {i}"), net));
    }
    for i in 0..4 {
        let (net, _) = random_safe_tree(&mut rng);
        nets.push((format!("random tree {i}"), net));
    }

    let mut checks = 0usize;
    for (name, net) in &nets {
        let grid = if net.link_count() <= 7 { 40 } else { 25 };
        let prop = check_link_monotonicity(net, &RoutingPolicy::Proportional, grid).unwrap();
        checks += 1;
        push_if(
            &mut failures,
            prop.is_monotone(),
            format!(
                "{name}: proportional policy lost monotonicity ({} violations, first: {:?})",
                prop.violations,
                prop.witnesses.first()
            ),
        );
        // Every generated network keeps out-degree ≤ 3, so the second policy
        // is in scope everywhere.
        let policy = RoutingPolicy::bpa(ResilienceOracle::build(net).unwrap());
        let bpa = check_link_monotonicity(net, &policy, grid).unwrap();
        checks += 1;
        push_if(
            &mut failures,
            bpa.is_monotone(),
            format!(
                "{name}: bpa policy lost monotonicity ({} violations, first: {:?})",
                bpa.violations,
                bpa.witnesses.first()
            ),
        );
    }
    report(
        10,
        &failures,
        &format!("{checks} checker sweeps over {} networks, no violations", nets.len()),
    );
}

/// The adversary constructions carry their verdicts with them; spot-check
/// that a serialized plan re-simulates to the stated magnitude and verdict
/// (the library also enforces this at construction time).
#[test]
fn attack_plans_resimulate_to_their_verdicts() {
    let net = example2();
    let oracle = ResilienceOracle::build_with_grid(&net, 200).unwrap();
    let policy = RoutingPolicy::bpa(ResilienceOracle::build_with_grid(&net, 200).unwrap());
    let plan = bpa_guided_attack(&net, &policy, &oracle, EX2_LAMBDA).unwrap();
    assert_eq!(plan.construction, AttackConstruction::BpaGuided);
    let trace = plan
        .replay(&net, &policy, EX2_LAMBDA, RunOptions::default())
        .unwrap();
    assert_eq!(trace.transferring, plan.transferring_after);
    assert!((trace.outflow - plan.outflow_after).abs() <= 1e-9);
    let total: f64 = plan.entries.iter().map(|e| e.delta).sum();
    assert!((total - plan.magnitude).abs() <= 1e-12);
    assert!(plan
        .phases
        .iter()
        .all(|p| matches!(p.link.as_str(), "e1" | "e2" | "e3" | "e4" | "e5" | "e6" | "e7" | "e8" | "e9" | "e10")));
}
