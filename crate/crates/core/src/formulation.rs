//! MILP models for inspection planning: the degree-balanced baseline and the
//! subtour-elimination families layered on top of it.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{EdgeId, GipInstance};
use crate::lp::{ConstraintId, MilpModel, Sense, VarId};

/// Default cap on the number of commodity flow variables.
pub const MCF_SIZE_GUARD: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulationError {
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("expected a {expected} formulation, found {found}")]
    WrongFlavor {
        expected: SecFlavor,
        found: SecFlavor,
    },
    #[error("multi-commodity flow needs {vars} flow variables, above the memory guard of {guard}")]
    TooLarge { vars: usize, guard: usize },
    #[error("coverage threshold {q} is outside 0..={k}")]
    BadQ { q: usize, k: usize },
    #[error("partial coverage is already configured")]
    PartialCoverageTwice,
    #[error("vertex set does not contain the root")]
    RootNotInR,
    #[error("vertex set intersects every group")]
    NoExcludedGroup,
}

/// Which subtour-elimination family the model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecFlavor {
    Baseline,
    Scf,
    Mcf,
    /// Baseline rows only; cutset rows are generated lazily by branch-and-cut.
    GroupCutset,
}

impl fmt::Display for SecFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Scf => "single-commodity flow",
            Self::Mcf => "multi-commodity flow",
            Self::GroupCutset => "group-cutset",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flavor {
    pub sec: SecFlavor,
    /// `Some(q)`: only `q` groups need covering.
    pub partial_coverage: Option<usize>,
}

/// A model together with the mapping from instance edges to `x` variables.
#[derive(Debug, Clone)]
pub struct FormulationHandle {
    instance: Arc<GipInstance>,
    model: MilpModel,
    edge_vars: Vec<VarId>,
    coverage_rows: Vec<ConstraintId>,
    group_vars: Option<Vec<VarId>>,
    flavor: Flavor,
}

impl FormulationHandle {
    pub fn instance(&self) -> &GipInstance {
        &self.instance
    }

    pub fn shared_instance(&self) -> Arc<GipInstance> {
        Arc::clone(&self.instance)
    }

    pub fn model(&self) -> &MilpModel {
        &self.model
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn edge_var(&self, e: EdgeId) -> VarId {
        self.edge_vars[e]
    }

    pub fn edge_vars(&self) -> &[VarId] {
        &self.edge_vars
    }

    /// The `z` selection variables when partial coverage is active.
    pub fn group_vars(&self) -> Option<&[VarId]> {
        self.group_vars.as_deref()
    }

    /// Per-edge values of the `x` variables in a full solution vector.
    pub fn edge_values(&self, values: &[f64]) -> Vec<f64> {
        self.edge_vars.iter().map(|v| values[v.0]).collect()
    }

    /// Row enforcing at least one selected edge in `delta_out` for `group`:
    /// `sum x >= 1`, or `sum x >= z_group` under partial coverage.
    pub fn cutset_row(&self, delta_out: &[EdgeId], group: usize) -> (Vec<(VarId, f64)>, f64) {
        let mut coeffs: Vec<(VarId, f64)> = delta_out
            .iter()
            .map(|&e| (self.edge_vars[e], 1.0))
            .collect();
        match &self.group_vars {
            Some(z) => {
                coeffs.push((z[group], -1.0));
                (coeffs, 0.0)
            }
            None => (coeffs, 1.0),
        }
    }

    fn expect_sec(&self, expected: SecFlavor) -> Result<(), FormulationError> {
        if self.flavor.sec == expected {
            Ok(())
        } else {
            Err(FormulationError::WrongFlavor {
                expected,
                found: self.flavor.sec,
            })
        }
    }
}

/// Degree-balanced baseline: edge binaries, root departure, group coverage and
/// flow balance at every vertex.
pub fn build_baseline(
    inst: impl Into<Arc<GipInstance>>,
) -> Result<FormulationHandle, FormulationError> {
    let instance: Arc<GipInstance> = inst.into();
    if let Some(i) = instance.groups().iter().position(|g| g.is_empty()) {
        return Err(FormulationError::EmptyGroup(i));
    }
    let mut model = MilpModel::new();
    let edge_vars: Vec<VarId> = instance
        .edges()
        .iter()
        .map(|e| model.add_binary(format!("x_{}_{}", e.tail, e.head)))
        .collect();
    let objective = instance
        .edges()
        .iter()
        .zip(&edge_vars)
        .map(|(e, &v)| (v, e.cost))
        .collect();
    model.set_objective(objective).expect("fresh variables");

    let root = instance.root();
    let depart = instance
        .out_edges(root)
        .iter()
        .map(|&e| (edge_vars[e], 1.0))
        .collect();
    model
        .add_named_constraint("root", depart, Sense::Ge, 1.0)
        .expect("fresh variables");

    let mut coverage_rows = Vec::with_capacity(instance.num_groups());
    for (i, group) in instance.groups().iter().enumerate() {
        let entering = group
            .iter()
            .flat_map(|&v| instance.in_edges(v))
            .map(|&e| (edge_vars[e], 1.0))
            .collect();
        let id = model
            .add_named_constraint(format!("cover_{i}"), entering, Sense::Ge, 1.0)
            .expect("fresh variables");
        coverage_rows.push(id);
    }

    for v in 0..instance.num_vertices() {
        let mut row: Vec<(VarId, f64)> = instance
            .in_edges(v)
            .iter()
            .map(|&e| (edge_vars[e], 1.0))
            .collect();
        row.extend(instance.out_edges(v).iter().map(|&e| (edge_vars[e], -1.0)));
        model
            .add_named_constraint(format!("balance_{v}"), row, Sense::Eq, 0.0)
            .expect("fresh variables");
    }

    Ok(FormulationHandle {
        instance,
        model,
        edge_vars,
        coverage_rows,
        group_vars: None,
        flavor: Flavor {
            sec: SecFlavor::Baseline,
            partial_coverage: None,
        },
    })
}

/// Flow capacity used by the single-commodity rows: `2 (n - 1)`.
pub fn scf_big_m(num_vertices: usize) -> f64 {
    2.0 * (num_vertices.saturating_sub(1)) as f64
}

/// Single-commodity flow: every selected edge leaving a non-root vertex
/// consumes one unit of root-supplied flow.
pub fn add_scf(mut h: FormulationHandle) -> Result<FormulationHandle, FormulationError> {
    h.expect_sec(SecFlavor::Baseline)?;
    let inst = Arc::clone(&h.instance);
    let big_m = scf_big_m(inst.num_vertices());
    let flow: Vec<VarId> = inst
        .edges()
        .iter()
        .map(|e| {
            h.model
                .add_continuous(format!("f_{}_{}", e.tail, e.head), 0.0, f64::INFINITY)
                .expect("valid bounds")
        })
        .collect();
    for (e, &f) in flow.iter().enumerate() {
        h.model
            .add_named_constraint(
                format!("scf_cap_{e}"),
                vec![(f, 1.0), (h.edge_vars[e], -big_m)],
                Sense::Le,
                0.0,
            )
            .expect("known variables");
    }
    for v in (0..inst.num_vertices()).filter(|&v| v != inst.root()) {
        let mut row: Vec<(VarId, f64)> = inst.in_edges(v).iter().map(|&e| (flow[e], 1.0)).collect();
        for &e in inst.out_edges(v) {
            row.push((flow[e], -1.0));
            row.push((h.edge_vars[e], -1.0));
        }
        h.model
            .add_named_constraint(format!("scf_use_{v}"), row, Sense::Eq, 0.0)
            .expect("known variables");
    }
    h.flavor.sec = SecFlavor::Scf;
    Ok(h)
}

/// Multi-commodity flow: one unit commodity per group from the root into the
/// group, each bounded by the edge selection. Groups containing the root are
/// covered by any tour and get no commodity.
pub fn add_mcf(
    mut h: FormulationHandle,
    size_guard: usize,
) -> Result<FormulationHandle, FormulationError> {
    h.expect_sec(SecFlavor::Baseline)?;
    let inst = Arc::clone(&h.instance);
    let vars = inst.num_groups() * inst.num_edges();
    if vars > size_guard {
        return Err(FormulationError::TooLarge {
            vars,
            guard: size_guard,
        });
    }
    let root = inst.root();
    let group_vars = h.group_vars.clone();
    for (i, group) in inst.groups().iter().enumerate() {
        if group.contains(&root) {
            continue;
        }
        let mut in_group = vec![false; inst.num_vertices()];
        for &v in group {
            in_group[v] = true;
        }
        let flow: Vec<VarId> = inst
            .edges()
            .iter()
            .map(|e| {
                h.model
                    .add_continuous(format!("f{i}_{}_{}", e.tail, e.head), 0.0, 1.0)
                    .expect("valid bounds")
            })
            .collect();
        // Required amount: 1, or z_i under partial coverage.
        let demand = |mut row: Vec<(VarId, f64)>| match &group_vars {
            Some(z) => {
                row.push((z[i], -1.0));
                (row, 0.0)
            }
            None => (row, 1.0),
        };
        let (row, rhs) = demand(
            inst.out_edges(root)
                .iter()
                .map(|&e| (flow[e], 1.0))
                .collect(),
        );
        h.model
            .add_named_constraint(format!("mcf_emit_{i}"), row, Sense::Ge, rhs)
            .expect("known variables");
        let absorb: Vec<(VarId, f64)> = inst
            .edges()
            .iter()
            .enumerate()
            .filter_map(|(e, edge)| {
                let net = in_group[edge.head] as i32 - in_group[edge.tail] as i32;
                (net != 0).then(|| (flow[e], net as f64))
            })
            .collect();
        let (row, rhs) = demand(absorb);
        h.model
            .add_named_constraint(format!("mcf_absorb_{i}"), row, Sense::Ge, rhs)
            .expect("known variables");
        for v in (0..inst.num_vertices()).filter(|&v| v != root && !in_group[v]) {
            let mut row: Vec<(VarId, f64)> =
                inst.in_edges(v).iter().map(|&e| (flow[e], 1.0)).collect();
            row.extend(inst.out_edges(v).iter().map(|&e| (flow[e], -1.0)));
            h.model
                .add_named_constraint(format!("mcf_keep_{i}_{v}"), row, Sense::Eq, 0.0)
                .expect("known variables");
        }
        for (e, &f) in flow.iter().enumerate() {
            h.model
                .add_named_constraint(
                    format!("mcf_link_{i}_{e}"),
                    vec![(f, 1.0), (h.edge_vars[e], -1.0)],
                    Sense::Le,
                    0.0,
                )
                .expect("known variables");
        }
    }
    h.flavor.sec = SecFlavor::Mcf;
    Ok(h)
}

/// Marks the handle for lazy group-cutset separation; the static model stays
/// the baseline.
pub fn use_group_cutset(mut h: FormulationHandle) -> Result<FormulationHandle, FormulationError> {
    h.expect_sec(SecFlavor::Baseline)?;
    h.flavor.sec = SecFlavor::GroupCutset;
    Ok(h)
}

/// Outgoing cut `delta+(R)` for a root-containing vertex set `R` that misses
/// at least one group. `in_set[v]` marks membership of `R`. The row is
/// `sum_{e in delta+(R)} x_e >= 1`.
pub fn group_cutset_constraint(
    inst: &GipInstance,
    in_set: &[bool],
) -> Result<Vec<EdgeId>, FormulationError> {
    if !in_set[inst.root()] {
        return Err(FormulationError::RootNotInR);
    }
    if !inst.groups().iter().any(|g| g.iter().all(|&v| !in_set[v])) {
        return Err(FormulationError::NoExcludedGroup);
    }
    Ok(delta_out(inst, in_set))
}

/// Edges leaving the marked vertex set.
pub fn delta_out(inst: &GipInstance, in_set: &[bool]) -> Vec<EdgeId> {
    inst.edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| in_set[e.tail] && !in_set[e.head])
        .map(|(id, _)| id)
        .collect()
}

/// Lets any `q` of the `k` groups suffice: adds one selection binary per group,
/// relaxes each coverage row to `coverage_i >= z_i`, and requires `sum z >= q`.
pub fn add_partial_coverage(
    mut h: FormulationHandle,
    q: usize,
) -> Result<FormulationHandle, FormulationError> {
    h.expect_sec(SecFlavor::Baseline)?;
    if h.flavor.partial_coverage.is_some() {
        return Err(FormulationError::PartialCoverageTwice);
    }
    let k = h.instance.num_groups();
    if q > k {
        return Err(FormulationError::BadQ { q, k });
    }
    let z: Vec<VarId> = (0..k)
        .map(|i| h.model.add_binary(format!("z_{i}")))
        .collect();
    for (i, &row) in h.coverage_rows.iter().enumerate() {
        let c = h.model.constraint_mut(row);
        c.coeffs.push((z[i], -1.0));
        c.rhs = 0.0;
    }
    h.model
        .add_named_constraint(
            "coverage_quota",
            z.iter().map(|&v| (v, 1.0)).collect(),
            Sense::Ge,
            q as f64,
        )
        .expect("fresh variables");
    h.group_vars = Some(z);
    h.flavor.partial_coverage = Some(q);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{p2, t3};
    use crate::graph::Edge;
    use crate::lp::{relax, solve_lp, LpStatus, VarKind};

    #[test]
    fn baseline_counts() {
        let h = build_baseline(t3()).unwrap();
        assert_eq!(h.model().num_binaries(), 6);
        assert_eq!(h.model().num_constraints(), 1 + 2 + 3);
        let h = build_baseline(p2()).unwrap();
        assert_eq!(h.model().num_binaries(), 2);
        assert_eq!(h.model().num_constraints(), 1 + 1 + 2);
        let empty = GipInstance::new(3, 0, t3().edges().to_vec(), vec![vec![1], vec![]]).unwrap();
        assert_eq!(
            build_baseline(empty).unwrap_err(),
            FormulationError::EmptyGroup(1)
        );
    }

    #[test]
    fn scf_big_m_values() {
        assert_eq!(scf_big_m(1000), 1998.0);
        assert_eq!(scf_big_m(3), 4.0);
        let h = add_scf(build_baseline(t3()).unwrap()).unwrap();
        assert_eq!(h.model().num_vars(), 12);
        // |E| capacity rows plus n - 1 consumption rows
        assert_eq!(h.model().num_constraints(), 6 + 6 + 2);
        assert!(matches!(
            add_scf(h),
            Err(FormulationError::WrongFlavor { .. })
        ));
    }

    /// Fixes the x variables to the selection and solves the remaining LP.
    fn fixed_selection_lp(
        h: &FormulationHandle,
        selected: &[(usize, usize)],
    ) -> crate::lp::LpSolution {
        let inst = h.instance();
        let mut model = relax(h.model());
        for e in 0..inst.num_edges() {
            let edge = inst.edge(e);
            let on = selected.contains(&(edge.tail, edge.head)) as u8 as f64;
            model
                .add_constraint(vec![(h.edge_var(e), 1.0)], Sense::Eq, on)
                .unwrap();
        }
        solve_lp(&model).unwrap()
    }

    #[test]
    fn scf_accepts_the_triangle_tour() {
        let h = add_scf(build_baseline(t3()).unwrap()).unwrap();
        let s = fixed_selection_lp(&h, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(s.status, LpStatus::Optimal);
        let inst = h.instance();
        let flow_of = |u, v| {
            let e = inst.edge_between(u, v).unwrap();
            s.values[inst.num_edges() + e]
        };
        // The flow is forced: 2 units enter 1, one is used there, one moves on.
        assert!((flow_of(0, 1) - 2.0).abs() < 1e-9);
        assert!((flow_of(1, 2) - 1.0).abs() < 1e-9);
        assert!(flow_of(2, 0).abs() < 1e-9);
    }

    #[test]
    fn scf_rejects_a_detached_cycle() {
        let h = add_scf(build_baseline(t3()).unwrap()).unwrap();
        let s = fixed_selection_lp(&h, &[(1, 2), (2, 1)]);
        assert_eq!(s.status, LpStatus::Infeasible);
        // Attached to the root through vertex 1 the same cycle is fine.
        let s = fixed_selection_lp(&h, &[(1, 2), (2, 1), (0, 1), (1, 0)]);
        assert_eq!(s.status, LpStatus::Optimal);
    }

    #[test]
    fn mcf_counts_on_t3() {
        let h = add_mcf(build_baseline(t3()).unwrap(), MCF_SIZE_GUARD).unwrap();
        let base = 1 + 2 + 3;
        // per group: emit + absorb + conservation at the single vertex outside S_i and root + 6 links
        assert_eq!(h.model().num_vars(), 6 + 12);
        assert_eq!(h.model().num_constraints(), base + 2 * (1 + 1 + 1 + 6));
        assert_eq!(
            add_mcf(build_baseline(t3()).unwrap(), 11).unwrap_err(),
            FormulationError::TooLarge {
                vars: 12,
                guard: 11
            }
        );
    }

    /// Root r = 0 with spokes u = 1, v = 2, w = 3; POI b seen from {u, w}
    /// and POI g from {v, w}.
    fn fig1() -> GipInstance {
        let mut edges = Vec::new();
        for (spoke, cost) in [(1, 1.0), (2, 1.0), (3, 1.5)] {
            edges.push(Edge {
                tail: 0,
                head: spoke,
                cost,
            });
            edges.push(Edge {
                tail: spoke,
                head: 0,
                cost,
            });
        }
        GipInstance::new(4, 0, edges, vec![vec![1, 3], vec![2, 3]]).unwrap()
    }

    #[test]
    fn mcf_routes_both_commodities_through_the_shared_vertex() {
        let h = add_mcf(build_baseline(fig1()).unwrap(), MCF_SIZE_GUARD).unwrap();
        let inst = h.instance();
        let w_in = inst.edge_between(0, 3).unwrap();
        let s = fixed_selection_lp(&h, &[(0, 3), (3, 0)]);
        assert_eq!(s.status, LpStatus::Optimal);
        let per_group = inst.num_edges();
        for i in 0..2 {
            let f = s.values[per_group + i * per_group + w_in];
            assert!((f - 1.0).abs() < 1e-9, "commodity {i} carries {f}");
        }
    }

    #[test]
    fn mcf_skips_groups_holding_the_root() {
        let inst =
            GipInstance::new(3, 0, t3().edges().to_vec(), vec![vec![0, 2], vec![1]]).unwrap();
        let h = add_mcf(build_baseline(inst).unwrap(), MCF_SIZE_GUARD).unwrap();
        assert_eq!(h.model().num_vars(), 6 + 6);
    }

    #[test]
    fn cutset_rows() {
        let t3 = t3();
        let row = group_cutset_constraint(&t3, &[true, true, false]).unwrap();
        let mut pairs: Vec<_> = row
            .iter()
            .map(|&e| (t3.edge(e).tail, t3.edge(e).head))
            .collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 2), (1, 2)]);
        assert_eq!(
            group_cutset_constraint(&t3, &[true, true, true]),
            Err(FormulationError::NoExcludedGroup)
        );
        assert_eq!(
            group_cutset_constraint(&t3, &[false, true, true]),
            Err(FormulationError::RootNotInR)
        );
    }

    #[test]
    fn partial_coverage_shape() {
        let h = add_partial_coverage(build_baseline(t3()).unwrap(), 1).unwrap();
        assert_eq!(h.model().num_binaries(), 8);
        assert_eq!(h.model().num_constraints(), 1 + 2 + 3 + 1);
        let cover0 = &h.model().constraints()[1];
        assert_eq!(cover0.rhs, 0.0);
        assert!(cover0.coeffs.contains(&(h.group_vars().unwrap()[0], -1.0)));
        assert_eq!(h.flavor().partial_coverage, Some(1));
        assert_eq!(
            add_partial_coverage(build_baseline(t3()).unwrap(), 3).unwrap_err(),
            FormulationError::BadQ { q: 3, k: 2 }
        );
        assert!(h
            .model()
            .variables()
            .iter()
            .filter(|v| v.name.starts_with("z_"))
            .all(|v| v.kind == VarKind::Binary));
        // composes with a SEC family afterwards
        assert!(add_scf(h).is_ok());
    }
}
