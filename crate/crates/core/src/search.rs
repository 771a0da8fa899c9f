//! Best-first branch-and-bound over the LP relaxation, with lazy group-cutset
//! rows for branch-and-cut, a primal heuristic hook and an anytime bound log.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{FormulationHandle, SecFlavor};
use crate::graph::{
    euler_circuit, root_component_edges, verify_tour_quota, EdgeId, GipInstance, Tour, VertexId,
};
use crate::heuristic::{run_heuristic, HeuristicError, MatchingMode};
use crate::lp::{LpError, LpStatus, Sense, SimplexSolver, VarId, VarKind, INTEGRALITY_TOL};
use crate::separation::{
    flow_cuts_parallel, oracle_threads, sample_groups, separate_connectivity_among, Candidate, Cut,
    DEFAULT_SAMPLE_SIZE,
};

/// Nodes whose bound is within this of the incumbent are pruned.
pub const PRUNE_TOL: f64 = 1e-6;

/// Default number of processed nodes between heuristic calls.
pub const HEURISTIC_INTERVAL: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("the root LP relaxation is infeasible")]
    InfeasibleModel,
    #[error("{0}")]
    WrongFlavor(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    TimeLimit,
    /// The simplex iteration budget ran out.
    WorkLimit,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundEvent {
    RootLp,
    Incumbent,
    Cut,
    Node,
    Final,
}

/// One row of the anytime log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub elapsed_s: f64,
    pub ub: f64,
    pub lb: f64,
    pub gap_pct: f64,
    pub event: BoundEvent,
}

/// `100 (ub - lb) / ub`; infinite without an upper bound, zero when `ub` is 0.
pub fn gap_percent(ub: f64, lb: f64) -> f64 {
    if ub.is_infinite() {
        f64::INFINITY
    } else if ub <= 0.0 {
        0.0
    } else {
        (100.0 * (ub - lb) / ub).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub tour: Option<Tour>,
    pub ub: f64,
    pub lb: f64,
    pub gap_pct: f64,
    pub log: Vec<BoundRecord>,
    pub termination: Termination,
    /// Edge support of the solution behind the incumbent.
    pub selection: Option<Vec<EdgeId>>,
    pub root_bound: Option<f64>,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
}

impl Default for SolverReport {
    fn default() -> Self {
        Self {
            tour: None,
            ub: f64::INFINITY,
            lb: 0.0,
            gap_pct: f64::INFINITY,
            log: Vec::new(),
            termination: Termination::TimeLimit,
            selection: None,
            root_bound: None,
            nodes: 0,
            cuts: 0,
            lp_iterations: 0,
        }
    }
}

/// Appends a log row. The upper bound never increases and the lower bound
/// never decreases across rows, and the lower bound is capped by the upper.
pub fn record_bounds(report: &mut SolverReport, elapsed: f64, ub: f64, lb: f64, event: BoundEvent) {
    let (prev_ub, prev_lb) = report
        .log
        .last()
        .map_or((f64::INFINITY, f64::NEG_INFINITY), |r| (r.ub, r.lb));
    let ub = ub.min(prev_ub);
    let lb = lb.max(prev_lb).min(ub);
    report.ub = ub;
    report.lb = lb;
    report.gap_pct = gap_percent(ub, lb);
    report.log.push(BoundRecord {
        elapsed_s: elapsed,
        ub,
        lb,
        gap_pct: report.gap_pct,
        event,
    });
}

pub fn write_log_csv<W: Write>(log: &[BoundRecord], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    for row in log {
        writer.serialize(row)?;
    }
    if log.is_empty() {
        writer.write_record(["elapsed_s", "ub", "lb", "gap_pct", "event"])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_log_csv<R: Read>(input: R) -> Result<Vec<BoundRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Machine-readable summary written next to the tour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub ub: Option<f64>,
    pub lb: f64,
    pub gap_pct: Option<f64>,
    pub termination: Termination,
    pub wall_s: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
    /// Incumbent tour as `[tail, head]` pairs in traversal order.
    pub tour: Option<Vec<(VertexId, VertexId)>>,
}

impl SolverReport {
    pub fn summary(&self, inst: &GipInstance, wall_s: f64) -> ReportSummary {
        let finite = |x: f64| x.is_finite().then_some(x);
        ReportSummary {
            ub: finite(self.ub),
            lb: self.lb,
            gap_pct: finite(self.gap_pct),
            termination: self.termination,
            wall_s,
            nodes: self.nodes,
            cuts: self.cuts,
            lp_iterations: self.lp_iterations,
            tour: self.tour.as_ref().map(|t| t.pairs(inst)),
        }
    }
}

/// Produces feasible tours, optionally guided by LP edge values.
pub trait PrimalHeuristic {
    fn find_tour(&self, inst: &GipInstance, lp_values: Option<&[f64]>) -> Option<Tour>;
}

/// The covering-tree heuristic; exact matching falls back to greedy when the
/// tree has too many odd vertices.
#[derive(Debug, Clone, Copy)]
pub struct CoveringTreeHeuristic {
    pub mode: MatchingMode,
}

impl PrimalHeuristic for CoveringTreeHeuristic {
    fn find_tour(&self, inst: &GipInstance, lp_values: Option<&[f64]>) -> Option<Tour> {
        match run_heuristic(inst, lp_values, self.mode) {
            Ok(out) => Some(out.tour),
            Err(HeuristicError::MatchingFailed(_)) => {
                run_heuristic(inst, lp_values, MatchingMode::Greedy)
                    .ok()
                    .map(|out| out.tour)
            }
            Err(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Only integral candidates are separated.
    Connectivity,
    /// Fractional candidates are checked against every group.
    Flow,
    /// Fractional candidates are checked against a sample of groups.
    Combined,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub time_limit: Duration,
    pub heuristic_interval: usize,
    /// Simplex iteration budget. Unlike the time limit it stops the search
    /// at the same point on every run.
    pub work_limit: Option<usize>,
}

impl SearchConfig {
    pub fn with_time_limit(seconds: f64) -> Self {
        Self {
            time_limit: Duration::from_secs_f64(seconds.max(0.0)),
            heuristic_interval: HEURISTIC_INTERVAL,
            work_limit: None,
        }
    }

    pub fn with_work_limit(mut self, iterations: usize) -> Self {
        self.work_limit = Some(iterations);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CutConfig {
    pub oracle: OracleKind,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for CutConfig {
    fn default() -> Self {
        Self {
            oracle: OracleKind::Combined,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
        }
    }
}

/// Open subproblem: binaries fixed along the path from the root.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub id: usize,
    pub fixings: Vec<(VarId, f64)>,
    pub bound: f64,
    pub depth: usize,
}

impl PartialEq for SearchNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SearchNode {}

impl Ord for SearchNode {
    /// Max-heap order: lowest bound, then deepest, then lowest id is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for SearchNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cuts added so far, keyed by their sorted edge list (and group when the
/// row depends on it).
#[derive(Debug, Default)]
pub struct CutPool {
    keys: HashSet<(Vec<EdgeId>, Option<usize>)>,
}

impl CutPool {
    /// Returns false for a row already in the pool.
    pub fn insert(&mut self, cut: &Cut, per_group: bool) -> bool {
        let mut edges = cut.delta_out.clone();
        edges.sort_unstable();
        self.keys
            .insert((edges, per_group.then_some(cut.excluded_group)))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

struct Separator {
    config: CutConfig,
    rng: ChaCha8Rng,
    threads: usize,
}

enum NodeOutcome {
    Pruned,
    Branch {
        var: VarId,
        bound: f64,
    },
    /// Interrupted; carries the node's LP bound when one was computed.
    Stopped(Termination, Option<f64>),
}

struct Search<'a> {
    handle: &'a FormulationHandle,
    inst: &'a GipInstance,
    solver: SimplexSolver,
    binaries: Vec<VarId>,
    applied: Vec<Option<f64>>,
    quota: usize,
    heuristic: Option<&'a dyn PrimalHeuristic>,
    separator: Option<Separator>,
    pool: CutPool,
    report: SolverReport,
    start: Instant,
    config: SearchConfig,
    /// Smallest bound among open nodes, excluding the one being processed.
    open_min: f64,
    /// Edge values of the latest LP solution, for the periodic heuristic.
    last_values: Option<Vec<f64>>,
}

/// Branch-and-bound on a model whose subtour elimination is built in.
pub fn solve_bnb(
    handle: &FormulationHandle,
    config: &SearchConfig,
    heuristic: Option<&dyn PrimalHeuristic>,
) -> Result<SolverReport, SearchError> {
    match handle.flavor().sec {
        SecFlavor::Scf | SecFlavor::Mcf => {}
        other => {
            return Err(SearchError::WrongFlavor(format!(
                "branch-and-bound needs a flow formulation, got {other}"
            )))
        }
    }
    Search::new(handle, *config, heuristic, None).run()
}

/// Branch-and-cut on the group-cutset formulation: cutset rows are separated
/// from LP solutions and added lazily.
pub fn solve_bnc(
    handle: &FormulationHandle,
    config: &SearchConfig,
    cuts: &CutConfig,
    heuristic: Option<&dyn PrimalHeuristic>,
) -> Result<SolverReport, SearchError> {
    if handle.flavor().sec != SecFlavor::GroupCutset {
        return Err(SearchError::WrongFlavor(format!(
            "branch-and-cut needs the group-cutset formulation, got {}",
            handle.flavor().sec
        )));
    }
    let separator = Separator {
        config: *cuts,
        rng: ChaCha8Rng::seed_from_u64(cuts.seed),
        threads: oracle_threads(),
    };
    Search::new(handle, *config, heuristic, Some(separator)).run()
}

impl<'a> Search<'a> {
    fn new(
        handle: &'a FormulationHandle,
        config: SearchConfig,
        heuristic: Option<&'a dyn PrimalHeuristic>,
        separator: Option<Separator>,
    ) -> Self {
        let model = handle.model();
        let binaries: Vec<VarId> = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| VarId(j))
            .collect();
        let inst = handle.instance();
        Self {
            handle,
            inst,
            solver: SimplexSolver::new(model),
            applied: vec![None; model.num_vars()],
            binaries,
            quota: handle
                .flavor()
                .partial_coverage
                .unwrap_or(inst.num_groups()),
            heuristic,
            separator,
            pool: CutPool::default(),
            report: SolverReport::default(),
            start: Instant::now(),
            config,
            open_min: f64::INFINITY,
            last_values: None,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Which limit, if any, has been reached.
    fn exhausted(&self) -> Option<Termination> {
        if self
            .config
            .work_limit
            .is_some_and(|w| self.report.lp_iterations >= w)
        {
            Some(Termination::WorkLimit)
        } else if self.start.elapsed() >= self.config.time_limit {
            Some(Termination::TimeLimit)
        } else {
            None
        }
    }

    fn record(&mut self, lb: f64, event: BoundEvent) {
        let elapsed = self.elapsed();
        let ub = self.report.ub;
        record_bounds(&mut self.report, elapsed, ub, lb, event);
    }

    /// Accepts a tour as incumbent when it is feasible and improves the bound.
    fn offer_tour(&mut self, tour: Tour, selection: Option<Vec<EdgeId>>) -> bool {
        let Ok(cost) = verify_tour_quota(self.inst, &tour, self.quota) else {
            return false;
        };
        if cost >= self.report.ub - 1e-9 {
            return false;
        }
        self.report.selection = Some(selection.unwrap_or_else(|| tour.edges.clone()));
        self.report.tour = Some(tour);
        let elapsed = self.elapsed();
        let lb = self.report.log.last().map_or(0.0, |r| r.lb);
        record_bounds(&mut self.report, elapsed, cost, lb, BoundEvent::Incumbent);
        true
    }

    fn run_heuristic(&mut self, lp_values: Option<&[f64]>) {
        let Some(h) = self.heuristic else { return };
        if let Some(tour) = h.find_tour(self.inst, lp_values) {
            self.offer_tour(tour, None);
        }
    }

    fn apply_fixings(&mut self, fixings: &[(VarId, f64)]) {
        let mut wanted: Vec<Option<f64>> = vec![None; self.applied.len()];
        for &(v, value) in fixings {
            wanted[v.0] = Some(value);
        }
        for &v in &self.binaries {
            if wanted[v.0] != self.applied[v.0] {
                let (lo, hi) = wanted[v.0].map_or((0.0, 1.0), |x| (x, x));
                self.solver.set_bounds(v, lo, hi);
                self.applied[v.0] = wanted[v.0];
            }
        }
    }

    fn most_fractional(&self, values: &[f64]) -> Option<VarId> {
        let mut best: Option<(VarId, f64)> = None;
        for &v in &self.binaries {
            let x = values[v.0];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
                best = Some((v, frac));
            }
        }
        best.map(|(v, _)| v)
    }

    /// Turns an integral LP solution into a tour over the root's component.
    fn accept_integral(&mut self, values: &[f64]) {
        let selected: Vec<EdgeId> = (0..self.inst.num_edges())
            .filter(|&e| values[self.handle.edge_var(e).0] > 0.5)
            .collect();
        let component = root_component_edges(self.inst, &selected);
        if let Some(tour) = euler_circuit(self.inst, &component, self.inst.root()) {
            self.offer_tour(tour, Some(selected));
        }
    }

    /// Separation for one LP solution; returns the number of new rows.
    fn separate(&mut self, values: &[f64], fractional_allowed: bool) -> usize {
        let Some(sep) = self.separator.as_mut() else {
            return 0;
        };
        let inst = self.inst;
        let handle = self.handle;
        let cand = Candidate::new(handle.edge_values(values));
        let z: Option<Vec<f64>> = handle
            .group_vars()
            .map(|zs| zs.iter().map(|v| values[v.0]).collect());
        let cuts: Vec<Cut> = if cand.integral {
            let eligible = |i: usize| z.as_ref().is_none_or(|z| z[i] > 0.5);
            separate_connectivity_among(inst, &cand, eligible)
                .expect("candidate is integral")
                .into_iter()
                .collect()
        } else if fractional_allowed && sep.config.oracle != OracleKind::Connectivity {
            let k = inst.num_groups();
            let groups: Vec<usize> = match sep.config.oracle {
                OracleKind::Flow => (0..k).collect(),
                _ => sample_groups(k, sep.config.sample_size, &mut sep.rng),
            };
            let jobs: Vec<(usize, f64)> = groups
                .into_iter()
                .map(|i| (i, z.as_ref().map_or(1.0, |z| z[i].min(1.0))))
                .filter(|&(_, t)| t > INTEGRALITY_TOL)
                .collect();
            flow_cuts_parallel(inst, &cand, &jobs, sep.threads)
                .into_iter()
                .flatten()
                .collect()
        } else {
            Vec::new()
        };
        let per_group = handle.group_vars().is_some();
        let mut added = 0;
        for cut in cuts {
            if self.pool.insert(&cut, per_group) {
                let (coeffs, rhs) = handle.cutset_row(&cut.delta_out, cut.excluded_group);
                self.solver.add_row(&coeffs, Sense::Ge, rhs);
                added += 1;
            }
        }
        self.report.cuts += added;
        added
    }

    fn solve_lp(&mut self) -> Result<Option<(f64, Vec<f64>)>, SearchError> {
        let sol = self.solver.solve()?;
        self.report.lp_iterations += sol.iterations;
        Ok(match sol.status {
            LpStatus::Optimal => Some((sol.objective, sol.values)),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => {
                return Err(SearchError::Lp(LpError::NumericalFailure(
                    "relaxation reported unbounded".into(),
                )))
            }
        })
    }

    fn process(&mut self, node: &SearchNode, is_root: bool) -> Result<NodeOutcome, SearchError> {
        self.apply_fixings(&node.fixings);
        let mut fractional_done = false;
        let mut first = true;
        let mut last_bound = None;
        loop {
            let solved = match self.solve_lp() {
                Ok(s) => s,
                Err(SearchError::Lp(LpError::TimeLimit)) => {
                    return Ok(NodeOutcome::Stopped(Termination::TimeLimit, last_bound))
                }
                Err(e) => return Err(e),
            };
            let Some((bound, values)) = solved else {
                if is_root && first {
                    return Err(SearchError::InfeasibleModel);
                }
                return Ok(NodeOutcome::Pruned);
            };
            if is_root && first {
                self.report.root_bound = Some(bound);
                self.solver
                    .set_deadline(Some(self.start + self.config.time_limit));
                self.record(bound, BoundEvent::RootLp);
                let x = self.handle.edge_values(&values);
                self.run_heuristic(Some(&x));
            }
            first = false;
            last_bound = Some(bound);
            self.last_values = Some(self.handle.edge_values(&values));
            if bound >= self.report.ub - PRUNE_TOL {
                return Ok(NodeOutcome::Pruned);
            }
            if let Some(limit) = self.exhausted() {
                return Ok(NodeOutcome::Stopped(limit, last_bound));
            }
            let fractional = self.most_fractional(&values);
            let x_integral = Candidate::new(self.handle.edge_values(&values)).integral;
            let added = if x_integral || !fractional_done {
                if !x_integral {
                    fractional_done = true;
                }
                self.separate(&values, true)
            } else {
                0
            };
            if added > 0 {
                let lb = self.current_lb(bound);
                self.record(lb, BoundEvent::Cut);
                continue;
            }
            return Ok(match fractional {
                None => {
                    self.accept_integral(&values);
                    NodeOutcome::Pruned
                }
                Some(var) => NodeOutcome::Branch { var, bound },
            });
        }
    }

    /// Lower bound while `bound` is the current node's LP value.
    fn current_lb(&self, bound: f64) -> f64 {
        bound.min(self.open_min)
    }

    fn run(mut self) -> Result<SolverReport, SearchError> {
        self.run_heuristic(None);
        let mut open: BinaryHeap<SearchNode> = BinaryHeap::new();
        let mut next_id = 1;
        let mut processed = 0usize;
        let mut current = Some(SearchNode {
            id: 0,
            fixings: Vec::new(),
            bound: 0.0,
            depth: 0,
        });
        let mut last_lb = f64::NEG_INFINITY;
        let termination = loop {
            let node = match current.take().or_else(|| open.pop()) {
                Some(node) => node,
                None => {
                    break if self.report.tour.is_some() {
                        Termination::Optimal
                    } else {
                        Termination::Infeasible
                    }
                }
            };
            if node.bound >= self.report.ub - PRUNE_TOL {
                continue;
            }
            if let Some(limit) = self.exhausted().filter(|_| processed > 0) {
                open.push(node);
                break limit;
            }
            self.open_min = open.peek().map_or(f64::INFINITY, |n| n.bound);
            let outcome = self.process(&node, processed == 0)?;
            processed += 1;
            self.report.nodes = processed;
            match outcome {
                NodeOutcome::Stopped(limit, bound) => {
                    let bound = bound.map_or(node.bound, |b| b.max(node.bound));
                    open.push(SearchNode { bound, ..node });
                    break limit;
                }
                NodeOutcome::Pruned => {}
                NodeOutcome::Branch { var, bound } => {
                    for value in [1.0, 0.0] {
                        let mut fixings = node.fixings.clone();
                        fixings.push((var, value));
                        open.push(SearchNode {
                            id: next_id,
                            fixings,
                            bound,
                            depth: node.depth + 1,
                        });
                        next_id += 1;
                    }
                }
            }
            if self.config.heuristic_interval > 0
                && processed.is_multiple_of(self.config.heuristic_interval)
            {
                if let Some(x) = self.last_values.take() {
                    self.run_heuristic(Some(&x));
                }
            }
            let lb = open.peek().map_or(self.report.ub, |n| n.bound);
            if lb > last_lb + 1e-9 && !open.is_empty() {
                last_lb = lb;
                self.record(lb, BoundEvent::Node);
            }
        };
        let lb = match termination {
            Termination::Optimal => self.report.ub,
            Termination::Infeasible => self.report.log.last().map_or(0.0, |r| r.lb),
            Termination::TimeLimit | Termination::WorkLimit => open
                .iter()
                .map(|n| n.bound)
                .fold(f64::INFINITY, f64::min)
                .min(self.report.ub),
        };
        self.report.termination = termination;
        self.record(lb, BoundEvent::Final);
        Ok(self.report)
    }
}
