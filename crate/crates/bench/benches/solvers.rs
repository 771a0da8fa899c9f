use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gip_core::brute::brute_force_optimum;
use gip_core::lp::{relax, solve_lp};
use gip_core::separation::max_flow_min_cut;
use gip_core::sim::{generate_scenario, random_small_instance, ScenarioParams, SensorModel};
use gip_core::{
    add_scf, build_baseline, run_heuristic, use_group_cutset, Feasibility, GipInstance,
    MatchingMode,
};

/// First feasible simulated instance of `n` vertices and `k` groups, with an
/// all-round sensor so that small roadmaps see every point.
fn feasible_scenario(n: usize, k: usize) -> GipInstance {
    (0..)
        .find_map(|seed| {
            let mut params = ScenarioParams::new(n, k, seed);
            params.sensor = SensorModel {
                fov_half_angle: std::f64::consts::PI,
                range: 60.0,
            };
            let inst = generate_scenario(&params).ok()?.instance;
            (inst.feasibility() == Feasibility::Feasible).then_some(inst)
        })
        .expect("some seed is feasible")
}

fn simplex(c: &mut Criterion) {
    let small = random_small_instance(3, (8, 8), 20, (2, 3));
    let scf = relax(add_scf(build_baseline(small).unwrap()).unwrap().model());
    c.bench_function("simplex/scf_root_8_vertices", |b| {
        b.iter(|| solve_lp(black_box(&scf)).unwrap())
    });
    let large = feasible_scenario(500, 20);
    let cutset = relax(
        use_group_cutset(build_baseline(large).unwrap())
            .unwrap()
            .model(),
    );
    c.bench_function("simplex/cutset_root_500_vertices", |b| {
        b.iter(|| solve_lp(black_box(&cutset)).unwrap())
    });
}

fn max_flow(c: &mut Criterion) {
    let inst = feasible_scenario(1000, 10);
    let capacities: Vec<f64> = (0..inst.num_edges())
        .map(|e| (e as f64 * 0.618_033_988_75).fract())
        .collect();
    let sinks = inst.group(0).to_vec();
    c.bench_function("max_flow/1000_vertices", |b| {
        b.iter(|| max_flow_min_cut(black_box(&inst), &capacities, inst.root(), &sinks))
    });
}

fn heuristic(c: &mut Criterion) {
    let inst = feasible_scenario(500, 20);
    for (name, mode) in [
        ("greedy", MatchingMode::Greedy),
        ("exact", MatchingMode::Exact),
    ] {
        if run_heuristic(&inst, None, mode).is_err() {
            continue;
        }
        c.bench_function(&format!("heuristic/{name}_500_vertices"), |b| {
            b.iter(|| run_heuristic(black_box(&inst), None, mode).unwrap())
        });
    }
}

fn brute_force(c: &mut Criterion) {
    let inst = random_small_instance(5, (7, 7), 16, (2, 3));
    c.bench_function("brute_force/16_edges", |b| {
        b.iter(|| brute_force_optimum(black_box(&inst), 16).unwrap())
    });
}

criterion_group!(benches, simplex, max_flow, heuristic, brute_force);
criterion_main!(benches);
