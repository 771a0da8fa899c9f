//! Separation of group-cutset rows: connectivity checks for integral
//! candidates, max-flow checks for fractional ones, and a sampled mix.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

use crate::formulation::delta_out;
use crate::graph::{reachable_from, EdgeId, GipInstance, VertexId};
use crate::lp::{CUT_VIOLATION_TOL, INTEGRALITY_TOL};

/// Default number of groups checked per fractional candidate.
pub const DEFAULT_SAMPLE_SIZE: usize = 100;

const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeparationError {
    #[error("candidate is not integral")]
    NotIntegral,
}

/// Edge values of an LP solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub integral: bool,
}

impl Candidate {
    pub fn new(values: Vec<f64>) -> Self {
        let integral = values
            .iter()
            .all(|&x| x.abs() <= INTEGRALITY_TOL || (x - 1.0).abs() <= INTEGRALITY_TOL);
        Self { values, integral }
    }

    pub fn selected(&self) -> Vec<bool> {
        self.values.iter().map(|&x| x > 0.5).collect()
    }
}

/// A violated group-cutset row: some edge must leave `region`, a vertex set
/// holding the root but no vertex of `excluded_group`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub region: Vec<VertexId>,
    pub excluded_group: usize,
    pub delta_out: Vec<EdgeId>,
    /// Candidate value summed over `delta_out`.
    pub value: f64,
}

impl Cut {
    fn from_side(inst: &GipInstance, cand: &Candidate, side: &[bool], group: usize) -> Self {
        let delta = delta_out(inst, side);
        let value = delta.iter().map(|&e| cand.values[e]).sum();
        Self {
            region: (0..inst.num_vertices()).filter(|&v| side[v]).collect(),
            excluded_group: group,
            delta_out: delta,
            value,
        }
    }
}

/// For an integral candidate, finds the lowest-index group that the vertices
/// reachable from the root miss. On degree-balanced selections this set is
/// the root's strongly connected component.
pub fn separate_connectivity(
    inst: &GipInstance,
    cand: &Candidate,
) -> Result<Option<Cut>, SeparationError> {
    separate_connectivity_among(inst, cand, |_| true)
}

/// As [`separate_connectivity`], only considering groups for which `eligible`
/// holds.
pub fn separate_connectivity_among(
    inst: &GipInstance,
    cand: &Candidate,
    eligible: impl Fn(usize) -> bool,
) -> Result<Option<Cut>, SeparationError> {
    if !cand.integral {
        return Err(SeparationError::NotIntegral);
    }
    let component = reachable_from(inst, inst.root(), &cand.selected());
    let missed = (0..inst.num_groups())
        .filter(|&i| eligible(i))
        .find(|&i| inst.group(i).iter().all(|&v| !component[v]));
    Ok(missed.map(|i| Cut::from_side(inst, cand, &component, i)))
}

/// Residual network over the positive-capacity edges plus a virtual sink.
struct FlowNetwork {
    head: Vec<usize>,
    residual: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            residual: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
        }
    }

    /// Arc `2i` is forward, `2i + 1` its reverse.
    fn add_arc(&mut self, from: usize, to: usize, capacity: f64) {
        self.adjacency[from].push(self.head.len());
        self.head.push(to);
        self.residual.push(capacity);
        self.adjacency[to].push(self.head.len());
        self.head.push(from);
        self.residual.push(0.0);
    }

    /// Edmonds-Karp: augment along shortest residual paths.
    fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        let mut parent_arc = vec![usize::MAX; self.adjacency.len()];
        loop {
            parent_arc.fill(usize::MAX);
            let mut queue = VecDeque::from([source]);
            let mut found = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &a in &self.adjacency[u] {
                    let v = self.head[a];
                    if v != source && parent_arc[v] == usize::MAX && self.residual[a] > RESIDUAL_TOL
                    {
                        parent_arc[v] = a;
                        if v == sink {
                            found = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !found {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let a = parent_arc[v];
                bottleneck = bottleneck.min(self.residual[a]);
                v = self.head[a ^ 1];
            }
            let mut v = sink;
            while v != source {
                let a = parent_arc[v];
                self.residual[a] -= bottleneck;
                self.residual[a ^ 1] += bottleneck;
                v = self.head[a ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Nodes that can still push flow into `sink`.
    fn reaching_sink(&self, sink: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        seen[sink] = true;
        let mut stack = vec![sink];
        while let Some(v) = stack.pop() {
            // arc a^1 goes u -> v when a goes v -> u
            for &a in &self.adjacency[v] {
                let u = self.head[a];
                if !seen[u] && self.residual[a ^ 1] > RESIDUAL_TOL {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

/// Maximum flow from `source` to a virtual sink fed by unit arcs from every
/// vertex in `sinks`, with edge capacities `capacities`. Also returns the
/// source side of a minimum cut, excluding the virtual sink. Among minimum cuts
/// the one with the largest source side is returned.
pub fn max_flow_min_cut(
    inst: &GipInstance,
    capacities: &[f64],
    source: VertexId,
    sinks: &[VertexId],
) -> (f64, Vec<bool>) {
    let n = inst.num_vertices();
    let t = n;
    let mut net = FlowNetwork::new(n + 1);
    for (e, edge) in inst.edges().iter().enumerate() {
        if capacities[e] > RESIDUAL_TOL {
            net.add_arc(edge.tail, edge.head, capacities[e]);
        }
    }
    for &v in sinks {
        net.add_arc(v, t, 1.0);
    }
    let value = net.max_flow(source, t);
    let mut side: Vec<bool> = net.reaching_sink(t).iter().map(|&r| !r).collect();
    side.truncate(n);
    (value, side)
}

/// Cut separating the root from `group` when the max-flow into the group is
/// below `threshold - CUT_VIOLATION_TOL`. Requires `threshold <= 1`, so that
/// the group lies outside the returned region.
pub fn flow_cut(inst: &GipInstance, cand: &Candidate, group: usize, threshold: f64) -> Option<Cut> {
    let sinks = inst.group(group);
    if sinks.contains(&inst.root()) {
        return None;
    }
    let (value, side) = max_flow_min_cut(inst, &cand.values, inst.root(), sinks);
    (value < threshold.min(1.0) - CUT_VIOLATION_TOL)
        .then(|| Cut::from_side(inst, cand, &side, group))
}

/// Number of worker threads for per-group flow computations, from
/// `GIP_THREADS` (0 or unset: all available cores).
pub fn oracle_threads() -> usize {
    let requested = std::env::var("GIP_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs `flow_cut` for each listed `(group, threshold)`, in order, on up to
/// `threads` workers. Entry `j` corresponds to `groups[j]`.
pub fn flow_cuts_parallel(
    inst: &GipInstance,
    cand: &Candidate,
    groups: &[(usize, f64)],
    threads: usize,
) -> Vec<Option<Cut>> {
    let threads = threads.clamp(1, groups.len().max(1));
    if threads == 1 {
        return groups
            .iter()
            .map(|&(i, t)| flow_cut(inst, cand, i, t))
            .collect();
    }
    let chunk = groups.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = groups
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&(i, t)| flow_cut(inst, cand, i, t))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("flow worker panicked"))
            .collect()
    })
}

/// Cuts for every listed group whose max-flow value from the root stays below
/// one.
pub fn separate_flow(inst: &GipInstance, cand: &Candidate, group_ids: &[usize]) -> Vec<Cut> {
    let jobs: Vec<(usize, f64)> = group_ids.iter().map(|&i| (i, 1.0)).collect();
    flow_cuts_parallel(inst, cand, &jobs, oracle_threads())
        .into_iter()
        .flatten()
        .collect()
}

/// Connectivity check for integral candidates; otherwise flow checks on
/// `min(sample_size, k)` groups drawn without replacement.
pub fn separate_combined<R: Rng + ?Sized>(
    inst: &GipInstance,
    cand: &Candidate,
    sample_size: usize,
    rng: &mut R,
) -> Vec<Cut> {
    if cand.integral {
        return separate_connectivity(inst, cand)
            .expect("candidate is integral")
            .into_iter()
            .collect();
    }
    let groups = sample_groups(inst.num_groups(), sample_size, rng);
    separate_flow(inst, cand, &groups)
}

/// Sorted uniform sample of `min(sample_size, k)` distinct group ids.
pub fn sample_groups<R: Rng + ?Sized>(k: usize, sample_size: usize, rng: &mut R) -> Vec<usize> {
    let mut ids = rand::seq::index::sample(rng, k, sample_size.min(k)).into_vec();
    ids.sort_unstable();
    ids
}
