#![allow(dead_code)]

use gip_core::brute::{brute_force_optimum, DEFAULT_MAX_EDGES};
use gip_core::lp::{relax, solve_lp, LpStatus};
use gip_core::sim::random_small_instance;
use gip_core::{
    add_mcf, add_scf, build_baseline, solve_bnb, solve_bnc, use_group_cutset,
    CoveringTreeHeuristic, CutConfig, FormulationHandle, GipInstance, MatchingMode, OracleKind,
    SearchConfig, SolverReport, MCF_SIZE_GUARD,
};

pub const GREEDY: CoveringTreeHeuristic = CoveringTreeHeuristic {
    mode: MatchingMode::Greedy,
};

/// The tiny-instance suite: 4-8 vertices, at most 20 edges, 1-3 groups.
pub fn suite_instance(seed: u64) -> GipInstance {
    random_small_instance(seed, (4, 8), 20, (1, 3))
}

pub fn optimum(inst: &GipInstance) -> Option<f64> {
    brute_force_optimum(inst, DEFAULT_MAX_EDGES)
        .expect("suite instances are small")
        .cost()
}

pub fn generous() -> SearchConfig {
    SearchConfig::with_time_limit(60.0)
}

pub fn scf(inst: &GipInstance) -> FormulationHandle {
    add_scf(build_baseline(inst.clone()).unwrap()).unwrap()
}

pub fn mcf(inst: &GipInstance) -> FormulationHandle {
    add_mcf(build_baseline(inst.clone()).unwrap(), MCF_SIZE_GUARD).unwrap()
}

pub fn cutset(inst: &GipInstance) -> FormulationHandle {
    use_group_cutset(build_baseline(inst.clone()).unwrap()).unwrap()
}

pub fn run_bnb(h: &FormulationHandle) -> SolverReport {
    solve_bnb(h, &generous(), Some(&GREEDY)).unwrap()
}

pub fn run_bnc(
    h: &FormulationHandle,
    oracle: OracleKind,
    sample_size: usize,
    seed: u64,
) -> SolverReport {
    let cuts = CutConfig {
        oracle,
        sample_size,
        seed,
    };
    solve_bnc(h, &generous(), &cuts, Some(&GREEDY)).unwrap()
}

/// Objective of the LP relaxation of the static model.
pub fn root_bound(h: &FormulationHandle) -> f64 {
    let sol = solve_lp(&relax(h.model())).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
