mod common;

use common::optimum;
use gip_core::sim::random_small_instance;
use gip_core::{run_heuristic, verify_tour, Edge, Feasibility, GipInstance, MatchingMode};
use proptest::prelude::*;

fn digraph(seed: u64) -> GipInstance {
    random_small_instance(seed, (4, 8), 20, (1, 4))
}

/// A smaller digraph made symmetric: each connected pair gets both
/// directions at the cost of the first one listed, like a roadmap. At most 22 edges, so brute force still applies.
fn symmetric(seed: u64) -> GipInstance {
    let base = random_small_instance(seed, (4, 7), 11, (1, 4));
    let mut edges: Vec<Edge> = Vec::new();
    for e in base.edges() {
        if !edges.iter().any(|f| f.tail == e.head && f.head == e.tail) {
            edges.push(*e);
            edges.push(Edge {
                tail: e.head,
                head: e.tail,
                cost: e.cost,
            });
        }
    }
    GipInstance::new(
        base.num_vertices(),
        base.root(),
        edges,
        base.groups().to_vec(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_instances_always_get_a_tour(seed in any::<u64>()) {
        let inst = symmetric(seed);
        prop_assume!(inst.feasibility() == Feasibility::Feasible);
        let best = optimum(&inst).expect("feasible instance has a tour");
        let greedy = run_heuristic(&inst, None, MatchingMode::Greedy).unwrap();
        let exact = run_heuristic(&inst, None, MatchingMode::Exact).unwrap();
        for outcome in [&greedy, &exact] {
            let cost = verify_tour(&inst, &outcome.tour).unwrap();
            prop_assert!((cost - outcome.cost).abs() < 1e-9);
            prop_assert!(cost >= best - 1e-9);
        }
        prop_assert!(exact.cost <= greedy.cost + 1e-9);
        // With an empty tree the root covers everything and any tour costs more.
        prop_assert!(exact.tree.edges.is_empty() || exact.cost <= 2.0 * exact.tree_cost + 1e-9);
    }

    /// On digraphs a tour through given vertices can be hard to find, so a
    /// failure is allowed, but every tour returned must verify.
    #[test]
    fn digraph_tours_verify_and_exact_never_loses(seed in any::<u64>()) {
        let inst = digraph(seed);
        prop_assume!(inst.feasibility() == Feasibility::Feasible);
        let greedy = run_heuristic(&inst, None, MatchingMode::Greedy);
        let exact = run_heuristic(&inst, None, MatchingMode::Exact);
        // Exact mode also tries the greedy pairing, so it fails only if
        // greedy does.
        prop_assert!(exact.is_ok() || greedy.is_err());
        if let (Ok(greedy), Ok(exact)) = (greedy, exact) {
            let best = optimum(&inst).expect("feasible instance has a tour");
            for outcome in [&greedy, &exact] {
                prop_assert!(verify_tour(&inst, &outcome.tour).is_ok());
                prop_assert!(outcome.cost >= best - 1e-9);
            }
            prop_assert!(exact.cost <= greedy.cost + 1e-9);
        }
    }

    #[test]
    fn lp_guided_runs_on_symmetric_instances_stay_feasible(
        seed in any::<u64>(),
        weights in proptest::collection::vec(0.0..=1.0f64, 22),
    ) {
        let inst = symmetric(seed);
        prop_assume!(inst.feasibility() == Feasibility::Feasible);
        let values = &weights[..inst.num_edges()];
        let outcome = run_heuristic(&inst, Some(values), MatchingMode::Greedy).unwrap();
        prop_assert!(verify_tour(&inst, &outcome.tour).is_ok());
    }
}

#[test]
fn digraph_success_rate_stays_high() {
    let feasible: Vec<_> = (0..500)
        .map(digraph)
        .filter(|inst| inst.feasibility() == Feasibility::Feasible)
        .collect();
    let found = feasible
        .iter()
        .filter(|inst| run_heuristic(inst, None, MatchingMode::Greedy).is_ok())
        .count();
    let rate = found as f64 / feasible.len() as f64;
    assert!(
        rate >= 0.95,
        "{found} of {} feasible digraphs",
        feasible.len()
    );
}
