//! Exhaustive optimum over all edge subsets, for checking solvers on tiny
//! instances.

use thiserror::Error;

use crate::graph::{euler_circuit, reachable_from, GipInstance, Tour};

pub const DEFAULT_MAX_EDGES: usize = 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BruteForceError {
    #[error("instance has {edges} edges, enumeration is capped at {max}")]
    TooLarge { edges: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BruteForceOutcome {
    Optimal { cost: f64, tour: Tour },
    Infeasible,
}

impl BruteForceOutcome {
    pub fn cost(&self) -> Option<f64> {
        match self {
            Self::Optimal { cost, .. } => Some(*cost),
            Self::Infeasible => None,
        }
    }
}

/// Minimum-cost tour by enumerating every edge selection that is degree
/// balanced, leaves the root, covers every group and forms one component
/// through the root.
pub fn brute_force_optimum(
    inst: &GipInstance,
    max_edges: usize,
) -> Result<BruteForceOutcome, BruteForceError> {
    brute_force_partial(inst, max_edges, inst.num_groups())
}

/// As [`brute_force_optimum`] but only `min_covered` groups need covering.
pub fn brute_force_partial(
    inst: &GipInstance,
    max_edges: usize,
    min_covered: usize,
) -> Result<BruteForceOutcome, BruteForceError> {
    let mut best: Option<(f64, u64)> = None;
    for_each_feasible_selection(inst, max_edges, min_covered, |mask, cost| {
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, mask));
        }
    })?;
    Ok(match best {
        None => BruteForceOutcome::Infeasible,
        Some((cost, mask)) => {
            let edges: Vec<_> = (0..inst.num_edges())
                .filter(|&e| mask & (1 << e) != 0)
                .collect();
            let tour =
                euler_circuit(inst, &edges, inst.root()).expect("balanced connected selection");
            BruteForceOutcome::Optimal { cost, tour }
        }
    })
}

/// Calls `visit(mask, cost)` for every edge selection (bit `e` set when edge
/// `e` is used) that forms a tour covering at least `min_covered` groups.
pub fn for_each_feasible_selection(
    inst: &GipInstance,
    max_edges: usize,
    min_covered: usize,
    mut visit: impl FnMut(u64, f64),
) -> Result<(), BruteForceError> {
    let m = inst.num_edges();
    if m > max_edges || m >= 64 {
        return Err(BruteForceError::TooLarge {
            edges: m,
            max: max_edges,
        });
    }
    let n = inst.num_vertices();
    let root = inst.root();
    let group_of = inst.groups_of_vertices();
    let mut net = vec![0i32; n];
    let mut unbalanced = 0usize;
    let mut mask = 0u64;
    // Gray code walk: step i flips the edge at the lowest set bit of i.
    for step in 1u64..(1u64 << m) {
        let e = step.trailing_zeros() as usize;
        mask ^= 1 << e;
        let sign = if mask & (1 << e) != 0 { 1 } else { -1 };
        let edge = inst.edge(e);
        for (v, delta) in [(edge.tail, sign), (edge.head, -sign)] {
            let before = net[v];
            net[v] += delta;
            match (before == 0, net[v] == 0) {
                (true, false) => unbalanced += 1,
                (false, true) => unbalanced -= 1,
                _ => {}
            }
        }
        if unbalanced != 0 {
            continue;
        }
        if !inst.out_edges(root).iter().any(|&e| mask & (1 << e) != 0) {
            continue;
        }
        let selected: Vec<bool> = (0..m).map(|e| mask & (1 << e) != 0).collect();
        let reach = reachable_from(inst, root, &selected);
        let connected = (0..m)
            .filter(|&e| selected[e])
            .all(|e| reach[inst.edge(e).tail]);
        if !connected {
            continue;
        }
        let mut covered = vec![false; inst.num_groups()];
        for v in (0..n).filter(|&v| reach[v]) {
            for &g in &group_of[v] {
                covered[g] = true;
            }
        }
        if covered.iter().filter(|&&c| c).count() < min_covered {
            continue;
        }
        let cost: f64 = (0..m)
            .filter(|&e| selected[e])
            .map(|e| inst.edge(e).cost)
            .sum();
        visit(mask, cost);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{p2, t3};
    use crate::graph::{verify_tour, Edge};

    #[test]
    fn t3_optimum_is_three() {
        let out = brute_force_optimum(&t3(), DEFAULT_MAX_EDGES).unwrap();
        let BruteForceOutcome::Optimal { cost, tour } = out else {
            panic!("T3 is feasible");
        };
        assert_eq!(cost, 3.0);
        assert_eq!(verify_tour(&t3(), &tour), Ok(3.0));
    }

    #[test]
    fn p2_must_leave_the_root() {
        assert_eq!(brute_force_optimum(&p2(), 22).unwrap().cost(), Some(2.0));
        let root_group = GipInstance::new(2, 0, p2().edges().to_vec(), vec![vec![0]]).unwrap();
        assert_eq!(
            brute_force_optimum(&root_group, 22).unwrap().cost(),
            Some(2.0)
        );
    }

    #[test]
    fn reports_infeasible_and_too_large() {
        let one_way = GipInstance::new(
            2,
            0,
            vec![Edge {
                tail: 0,
                head: 1,
                cost: 1.0,
            }],
            vec![vec![1]],
        )
        .unwrap();
        assert_eq!(
            brute_force_optimum(&one_way, 22).unwrap(),
            BruteForceOutcome::Infeasible
        );
        assert_eq!(
            brute_force_optimum(&t3(), 5),
            Err(BruteForceError::TooLarge { edges: 6, max: 5 })
        );
    }

    #[test]
    fn partial_threshold() {
        assert_eq!(brute_force_partial(&t3(), 22, 1).unwrap().cost(), Some(2.0));
        assert_eq!(brute_force_partial(&t3(), 22, 0).unwrap().cost(), Some(2.0));
        assert_eq!(brute_force_partial(&t3(), 22, 2).unwrap().cost(), Some(3.0));
    }
}
