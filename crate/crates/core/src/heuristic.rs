//! Primal heuristic: discount edge costs by an LP solution, grow a tree that
//! touches every group, then close it into a tour by odd-vertex matching and
//! an Euler circuit.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::graph::{verify_tour, EdgeId, GipInstance, Tour, VertexId};
use crate::lp::FEASIBILITY_TOL;

/// Largest odd-vertex count for which exact matching enumerates pairings.
pub const EXACT_MATCHING_LIMIT: usize = 12;

const NO_EDGE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("LP value {value} of edge {edge} is outside [0, 1]")]
    OutOfRange { edge: EdgeId, value: f64 },
    #[error("group {0} cannot be reached and left from the root")]
    Unreachable(usize),
    #[error("exact matching supports at most {EXACT_MATCHING_LIMIT} odd vertices, tree has {0}")]
    MatchingFailed(usize),
    #[error("no directed path from {from} to {to}")]
    NoDirectedRealization { from: VertexId, to: VertexId },
    #[error("could not remove a repeated edge from the walk")]
    RepairFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingMode {
    Greedy,
    Exact,
}

/// `c(e) (1 - x_e)`, or the plain costs without LP values.
pub fn discount_costs(
    inst: &GipInstance,
    lp_values: Option<&[f64]>,
) -> Result<Vec<f64>, HeuristicError> {
    let Some(x) = lp_values else {
        return Ok(inst.costs());
    };
    inst.edges()
        .iter()
        .zip(x)
        .enumerate()
        .map(|(e, (edge, &value))| {
            if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&value) {
                return Err(HeuristicError::OutOfRange { edge: e, value });
            }
            Ok(edge.cost * (1.0 - value.clamp(0.0, 1.0)))
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, VertexId);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths: distances and the last edge into each vertex.
#[derive(Debug, Clone)]
pub struct PathTree {
    pub dist: Vec<f64>,
    pred: Vec<EdgeId>,
}

fn dijkstra(
    inst: &GipInstance,
    costs: &[f64],
    source: VertexId,
    blocked: Option<&[bool]>,
) -> PathTree {
    let n = inst.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_EDGE; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry(0.0, source));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in inst.out_edges(u) {
            if blocked.is_some_and(|b| b[e]) {
                continue;
            }
            let v = inst.edge(e).head;
            let nd = d + costs[e];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = e;
                heap.push(HeapEntry(nd, v));
            }
        }
    }
    PathTree { dist, pred }
}

impl PathTree {
    /// Edge ids of the path from the source to `target`.
    fn path_to(&self, inst: &GipInstance, target: VertexId) -> Option<Vec<EdgeId>> {
        if self.dist[target].is_infinite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = target;
        while self.pred[v] != NO_EDGE {
            let e = self.pred[v];
            path.push(e);
            v = inst.edge(e).tail;
        }
        path.reverse();
        Some(path)
    }
}

/// Shortest paths under fixed edge costs, computed per source on first use
/// and cached.
pub struct DistanceOracle<'a> {
    inst: &'a GipInstance,
    costs: Vec<f64>,
    trees: HashMap<VertexId, PathTree>,
}

impl<'a> DistanceOracle<'a> {
    pub fn new(inst: &'a GipInstance, costs: Vec<f64>) -> Self {
        Self {
            inst,
            costs,
            trees: HashMap::new(),
        }
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn from_source(&mut self, source: VertexId) -> &PathTree {
        let (inst, costs) = (self.inst, &self.costs);
        self.trees
            .entry(source)
            .or_insert_with(|| dijkstra(inst, costs, source, None))
    }

    pub fn dist(&mut self, from: VertexId, to: VertexId) -> f64 {
        self.from_source(from).dist[to]
    }

    pub fn path(&mut self, from: VertexId, to: VertexId) -> Option<Vec<EdgeId>> {
        let inst = self.inst;
        self.from_source(from).path_to(inst, to)
    }

    /// Mean of the two directed distances.
    pub fn sym_dist(&mut self, a: VertexId, b: VertexId) -> f64 {
        (self.dist(a, b) + self.dist(b, a)) / 2.0
    }
}

/// Edges of a tree grown from the root, each directed away from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringTree {
    pub edges: Vec<EdgeId>,
    pub vertices: Vec<VertexId>,
}

impl CoveringTree {
    pub fn cost(&self, costs: &[f64]) -> f64 {
        self.edges.iter().map(|&e| costs[e]).sum()
    }

    /// Tree vertices with odd degree, ascending.
    pub fn odd_vertices(&self, inst: &GipInstance) -> Vec<VertexId> {
        let mut degree = vec![0usize; inst.num_vertices()];
        for &e in &self.edges {
            degree[inst.edge(e).tail] += 1;
            degree[inst.edge(e).head] += 1;
        }
        (0..inst.num_vertices())
            .filter(|&v| degree[v] % 2 == 1)
            .collect()
    }
}

/// Vertices on a closed walk with the root, i.e. the root's strongly connected
/// component of the whole graph.
fn tour_reachable(inst: &GipInstance) -> Vec<bool> {
    crate::graph::root_scc(inst, &vec![true; inst.num_edges()])
}

/// Tree under construction plus, per vertex, the distance from the nearest
/// tree vertex.
struct Growth {
    tree: CoveringTree,
    in_tree: Vec<bool>,
    covered: Vec<bool>,
    best_dist: Vec<f64>,
    best_from: Vec<VertexId>,
}

impl Growth {
    fn add_vertex(
        &mut self,
        v: VertexId,
        group_of: &[Vec<usize>],
        oracle: &mut DistanceOracle<'_>,
    ) {
        self.in_tree[v] = true;
        self.tree.vertices.push(v);
        for &g in &group_of[v] {
            self.covered[g] = true;
        }
        let d = &oracle.from_source(v).dist;
        for (w, &dw) in d.iter().enumerate() {
            if dw < self.best_dist[w] || (dw == self.best_dist[w] && v < self.best_from[w]) {
                self.best_dist[w] = dw;
                self.best_from[w] = v;
            }
        }
    }
}

/// Greedily attaches the closest vertex of a still-uncovered group, by the
/// shortest path from the nearest tree vertex, until every group is touched.
pub fn build_covering_tree(
    inst: &GipInstance,
    oracle: &mut DistanceOracle<'_>,
) -> Result<CoveringTree, HeuristicError> {
    let n = inst.num_vertices();
    let root = inst.root();
    let usable = tour_reachable(inst);
    let group_of = inst.groups_of_vertices();
    let mut g = Growth {
        tree: CoveringTree {
            edges: Vec::new(),
            vertices: Vec::new(),
        },
        in_tree: vec![false; n],
        covered: inst
            .groups()
            .iter()
            .map(|grp| grp.contains(&root))
            .collect(),
        best_dist: vec![f64::INFINITY; n],
        best_from: vec![usize::MAX; n],
    };
    g.add_vertex(root, &group_of, oracle);

    loop {
        let mut wanted = vec![false; n];
        for (i, members) in inst.groups().iter().enumerate() {
            if !g.covered[i] {
                for &v in members {
                    wanted[v] = true;
                }
            }
        }
        let mut pick: Option<VertexId> = None;
        for v in (0..n).filter(|&v| wanted[v] && usable[v] && !g.in_tree[v]) {
            if g.best_dist[v].is_finite() && pick.is_none_or(|p| g.best_dist[v] < g.best_dist[p]) {
                pick = Some(v);
            }
        }
        let Some(target) = pick else {
            return match g.covered.iter().position(|&c| !c) {
                None => Ok(g.tree),
                Some(i) => Err(HeuristicError::Unreachable(i)),
            };
        };
        let path = oracle
            .path(g.best_from[target], target)
            .expect("finite distance has a path");
        // Keep only the part after the last vertex already in the tree.
        let start = path
            .iter()
            .rposition(|&e| g.in_tree[inst.edge(e).tail])
            .expect("path starts in the tree");
        for &e in &path[start..] {
            g.tree.edges.push(e);
            g.add_vertex(inst.edge(e).head, &group_of, oracle);
        }
    }
}

/// Pairs odd vertices, returning the pairs in the order they were chosen.
pub fn match_odd_vertices(
    odd: &[VertexId],
    mode: MatchingMode,
    oracle: &mut DistanceOracle<'_>,
) -> Result<Vec<(VertexId, VertexId)>, HeuristicError> {
    let m = odd.len();
    if mode == MatchingMode::Exact && m > EXACT_MATCHING_LIMIT {
        return Err(HeuristicError::MatchingFailed(m));
    }
    let mut dist = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let d = oracle.sym_dist(odd[i], odd[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let pairs = match mode {
        MatchingMode::Greedy => {
            let mut candidates: Vec<(usize, usize)> = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .collect();
            candidates.sort_by(|a, b| dist[a.0][a.1].total_cmp(&dist[b.0][b.1]).then(a.cmp(b)));
            let mut used = vec![false; m];
            let mut out = Vec::new();
            for (i, j) in candidates {
                if !used[i] && !used[j] {
                    used[i] = true;
                    used[j] = true;
                    out.push((i, j));
                }
            }
            out
        }
        MatchingMode::Exact => {
            let mut best = (f64::INFINITY, Vec::new());
            let mut used = vec![false; m];
            let mut current = Vec::new();
            enumerate_pairings(&dist, &mut used, &mut current, 0.0, &mut best);
            best.1
        }
    };
    Ok(pairs.into_iter().map(|(i, j)| (odd[i], odd[j])).collect())
}

fn enumerate_pairings(
    dist: &[Vec<f64>],
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    cost: f64,
    best: &mut (f64, Vec<(usize, usize)>),
) {
    let Some(i) = used.iter().position(|&u| !u) else {
        if cost < best.0 {
            *best = (cost, current.clone());
        }
        return;
    };
    used[i] = true;
    for j in i + 1..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        current.push((i, j));
        enumerate_pairings(dist, used, current, cost + dist[i][j], best);
        current.pop();
        used[j] = false;
    }
    used[i] = false;
}

/// Undirected Euler circuit over `links` from `start`, as a vertex sequence.
fn undirected_euler(n: usize, links: &[(VertexId, VertexId)], start: VertexId) -> Vec<VertexId> {
    let mut adj: Vec<Vec<(VertexId, usize)>> = vec![Vec::new(); n];
    for (id, &(a, b)) in links.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    let mut next = vec![0usize; n];
    let mut used = vec![false; links.len()];
    let mut stack = vec![start];
    let mut circuit = Vec::new();
    while let Some(&v) = stack.last() {
        while next[v] < adj[v].len() && used[adj[v][next[v]].1] {
            next[v] += 1;
        }
        if next[v] == adj[v].len() {
            circuit.push(v);
            stack.pop();
        } else {
            let (w, id) = adj[v][next[v]];
            used[id] = true;
            stack.push(w);
        }
    }
    circuit.reverse();
    circuit
}

fn walk_vertices(inst: &GipInstance, walk: &[EdgeId]) -> Vec<VertexId> {
    let mut vs = vec![inst.edge(walk[0]).tail];
    vs.extend(walk.iter().map(|&e| inst.edge(e).head));
    vs
}

fn covers_all(
    inst: &GipInstance,
    group_of: &[Vec<usize>],
    walk: &[EdgeId],
    skip: std::ops::Range<usize>,
) -> bool {
    let mut covered = vec![false; inst.num_groups()];
    let mut mark = |v: VertexId| {
        for &g in &group_of[v] {
            covered[g] = true;
        }
    };
    mark(inst.root());
    for (i, &e) in walk.iter().enumerate() {
        if !skip.contains(&i) {
            mark(inst.edge(e).head);
        }
    }
    covered.into_iter().all(|c| c)
}

/// Removes repeated directed edges from a closed walk, first by dropping the
/// loop between two uses when coverage allows, otherwise by rerouting one use
/// over edges the walk does not touch.
fn repair_repeats(
    inst: &GipInstance,
    costs: &[f64],
    mut walk: Vec<EdgeId>,
) -> Result<Vec<EdgeId>, HeuristicError> {
    let group_of = inst.groups_of_vertices();
    loop {
        let mut first_use: HashMap<EdgeId, usize> = HashMap::new();
        let mut repeat = None;
        for (i, &e) in walk.iter().enumerate() {
            if let Some(&j) = first_use.get(&e) {
                repeat = Some((j, i));
                break;
            }
            first_use.insert(e, i);
        }
        let Some((first, second)) = repeat else {
            return Ok(walk);
        };
        // walk[first + 1 ..= second] leads from head(e) back to head(e).
        if covers_all(inst, &group_of, &walk, first + 1..second + 1) {
            walk.drain(first + 1..second + 1);
            continue;
        }
        let mut blocked = vec![false; inst.num_edges()];
        for &e in &walk {
            blocked[e] = true;
        }
        let edge = inst.edge(walk[second]);
        let detour = dijkstra(inst, costs, edge.tail, Some(&blocked)).path_to(inst, edge.head);
        match detour {
            Some(path) => {
                walk.splice(second..second + 1, path);
            }
            None => return Err(HeuristicError::RepairFailed),
        }
    }
}

/// Drops closed sub-walks whose removal keeps every group covered, then
/// replaces `a -> v -> b` by an unused direct edge `a -> b` at repeated visits
/// of `v` when that is no more expensive.
fn shortcut(inst: &GipInstance, walk: &mut Vec<EdgeId>) {
    let group_of = inst.groups_of_vertices();
    let mut changed = true;
    while changed {
        changed = false;
        let vs = walk_vertices(inst, walk);
        'loops: for i in 0..vs.len() {
            for j in (i + 1..vs.len()).rev() {
                if vs[i] == vs[j] && j - i < walk.len() && covers_all(inst, &group_of, walk, i..j) {
                    walk.drain(i..j);
                    changed = true;
                    break 'loops;
                }
            }
        }
        if changed {
            continue;
        }
        let vs = walk_vertices(inst, walk);
        let mut seen = vec![false; inst.num_vertices()];
        seen[vs[0]] = true;
        for i in 1..vs.len() - 1 {
            let v = vs[i];
            if seen[v] {
                let (a, b) = (vs[i - 1], vs[i + 1]);
                if let Some(direct) = inst.edge_between(a, b).filter(|_| a != b) {
                    let detour = inst.edge(walk[i - 1]).cost + inst.edge(walk[i]).cost;
                    if !walk.contains(&direct) && inst.edge(direct).cost <= detour {
                        walk.splice(i - 1..i + 1, [direct]);
                        changed = true;
                        break;
                    }
                }
            }
            seen[v] = true;
        }
    }
}

/// Cheapest closed walk `r -> v -> ... -> r`, used when the root alone covers
/// every group.
fn cheapest_root_cycle(inst: &GipInstance, oracle: &mut DistanceOracle<'_>) -> Option<Vec<EdgeId>> {
    let root = inst.root();
    let mut best: Option<(f64, EdgeId)> = None;
    for &e in inst.out_edges(root) {
        let v = inst.edge(e).head;
        let total = inst.edge(e).cost + oracle.dist(v, root);
        if total.is_finite() && best.is_none_or(|(c, _)| total < c) {
            best = Some((total, e));
        }
    }
    let (_, e) = best?;
    let mut walk = vec![e];
    walk.extend(oracle.path(inst.edge(e).head, root)?);
    Some(walk)
}

/// Walk around the tree: every tree edge forward, then back along the
/// shortest return path.
fn doubled_tree_walk(
    inst: &GipInstance,
    tree: &CoveringTree,
    oracle: &mut DistanceOracle<'_>,
) -> Result<Vec<EdgeId>, HeuristicError> {
    let mut children: HashMap<VertexId, Vec<EdgeId>> = HashMap::new();
    for &e in &tree.edges {
        children.entry(inst.edge(e).tail).or_default().push(e);
    }
    let mut walk = Vec::new();
    let mut stack: Vec<(EdgeId, bool)> = children
        .get(&inst.root())
        .map(|c| c.iter().rev().map(|&e| (e, false)).collect())
        .unwrap_or_default();
    while let Some((e, returning)) = stack.pop() {
        let edge = inst.edge(e);
        if returning {
            let back = match inst.edge_between(edge.head, edge.tail) {
                Some(b) => vec![b],
                None => oracle.path(edge.head, edge.tail).ok_or(
                    HeuristicError::NoDirectedRealization {
                        from: edge.head,
                        to: edge.tail,
                    },
                )?,
            };
            walk.extend(back);
        } else {
            walk.push(e);
            stack.push((e, true));
            if let Some(c) = children.get(&edge.head) {
                stack.extend(c.iter().rev().map(|&e| (e, false)));
            }
        }
    }
    Ok(walk)
}

/// Tree plus matching traversed by an Euler circuit from the root, each step
/// realized by its directed shortest path, then repaired and shortcut.
fn matched_walk(
    inst: &GipInstance,
    costs: &[f64],
    tree: &CoveringTree,
    matching: &[(VertexId, VertexId)],
    oracle: &mut DistanceOracle<'_>,
) -> Result<Vec<EdgeId>, HeuristicError> {
    let mut links: Vec<(VertexId, VertexId)> = tree
        .edges
        .iter()
        .map(|&e| (inst.edge(e).tail, inst.edge(e).head))
        .collect();
    links.extend(matching.iter().copied());
    debug_assert!({
        let mut degree = vec![0usize; inst.num_vertices()];
        for &(a, b) in &links {
            degree[a] += 1;
            degree[b] += 1;
        }
        degree.iter().all(|d| d % 2 == 0)
    });
    let circuit = undirected_euler(inst.num_vertices(), &links, inst.root());
    let mut walk = Vec::new();
    for step in circuit.windows(2) {
        let (a, b) = (step[0], step[1]);
        let path = oracle
            .path(a, b)
            .ok_or(HeuristicError::NoDirectedRealization { from: a, to: b })?;
        walk.extend(path);
    }
    let mut walk = repair_repeats(inst, costs, walk)?;
    shortcut(inst, &mut walk);
    Ok(walk)
}

/// Closes the tree into a tour by matching its odd-degree vertices. Exact mode
/// also realizes the greedy pairing, since directed realization can make the
/// cheaper pairing the costlier tour. The doubled-tree walk is returned
/// instead when it is cheaper.
pub fn tree_to_tour(
    inst: &GipInstance,
    tree: &CoveringTree,
    mode: MatchingMode,
    oracle: &mut DistanceOracle<'_>,
) -> Result<Tour, HeuristicError> {
    let costs = inst.costs();
    if tree.edges.is_empty() {
        let walk =
            cheapest_root_cycle(inst, oracle).ok_or(HeuristicError::NoDirectedRealization {
                from: inst.root(),
                to: inst.root(),
            })?;
        return Ok(Tour::new(walk));
    }
    let odd = tree.odd_vertices(inst);
    let mut pairings = vec![match_odd_vertices(&odd, mode, oracle)?];
    if mode == MatchingMode::Exact {
        pairings.push(match_odd_vertices(&odd, MatchingMode::Greedy, oracle)?);
    }
    let mut candidates = Vec::new();
    let mut first_error = None;
    for matching in &pairings {
        match matched_walk(inst, &costs, tree, matching, oracle) {
            Ok(walk) => candidates.push(walk),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Ok(mut doubled) =
        doubled_tree_walk(inst, tree, oracle).and_then(|w| repair_repeats(inst, &costs, w))
    {
        shortcut(inst, &mut doubled);
        candidates.push(doubled);
    }
    let cost_of = |w: &Vec<EdgeId>| w.iter().map(|&e| costs[e]).sum::<f64>();
    let best = candidates
        .into_iter()
        .filter(|w| !w.is_empty() && verify_tour(inst, &Tour::new(w.clone())).is_ok())
        .min_by(|a, b| cost_of(a).total_cmp(&cost_of(b)))
        .ok_or(first_error.unwrap_or(HeuristicError::RepairFailed))?;
    Ok(Tour::new(best))
}

/// Grows a closed walk from the root by splicing in, for one uncovered group
/// at a time, the cheapest excursion from a walk vertex to the group and back
/// over edges the walk does not use yet. Used when realizing the tree fails,
/// which happens on sparse digraphs where undirected steps force an edge to be
/// traversed twice.
fn insertion_walk(inst: &GipInstance, costs: &[f64]) -> Option<Vec<EdgeId>> {
    let group_of = inst.groups_of_vertices();
    let mut walk: Vec<EdgeId> = Vec::new();
    loop {
        let mut covered = vec![false; inst.num_groups()];
        let vs = if walk.is_empty() {
            vec![inst.root()]
        } else {
            walk_vertices(inst, &walk)
        };
        for &v in &vs {
            for &g in &group_of[v] {
                covered[g] = true;
            }
        }
        let mut used = vec![false; inst.num_edges()];
        for &e in &walk {
            used[e] = true;
        }
        let mut inserted = false;
        let mut pending = false;
        for group in (0..inst.num_groups()).filter(|&g| !covered[g]) {
            pending = true;
            let mut best: Option<(f64, usize, Vec<EdgeId>)> = None;
            let mut tried = vec![false; inst.num_vertices()];
            for (position, &u) in vs.iter().enumerate() {
                if std::mem::replace(&mut tried[u], true) {
                    continue;
                }
                let out = dijkstra(inst, costs, u, Some(&used));
                let Some(&target) = inst
                    .group(group)
                    .iter()
                    .filter(|&&v| out.dist[v].is_finite())
                    .min_by(|&&a, &&b| out.dist[a].total_cmp(&out.dist[b]).then(a.cmp(&b)))
                else {
                    continue;
                };
                let mut detour = out.path_to(inst, target).expect("finite distance");
                let mut blocked = used.clone();
                for &e in &detour {
                    blocked[e] = true;
                }
                let back = dijkstra(inst, costs, target, Some(&blocked));
                let Some(back_path) = back.path_to(inst, u) else {
                    continue;
                };
                let total = out.dist[target] + back.dist[u];
                if best.as_ref().is_none_or(|(c, _, _)| total < *c) {
                    detour.extend(back_path);
                    best = Some((total, position, detour));
                }
            }
            if let Some((_, position, detour)) = best {
                walk.splice(position..position, detour);
                inserted = true;
                break;
            }
        }
        if !pending {
            return (!walk.is_empty()).then_some(walk);
        }
        if !inserted {
            return None;
        }
    }
}

/// The tree-based tour, or the insertion walk when the tree cannot be
/// realized.
fn close_tree(
    inst: &GipInstance,
    tree: &CoveringTree,
    mode: MatchingMode,
    oracle: &mut DistanceOracle<'_>,
) -> Result<Tour, HeuristicError> {
    tree_to_tour(inst, tree, mode, oracle).or_else(|e| {
        let mut walk = insertion_walk(inst, oracle.costs()).ok_or(e)?;
        shortcut(inst, &mut walk);
        Ok(Tour::new(walk))
    })
}

/// Everything the heuristic built on the way to its tour.
#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub tour: Tour,
    pub cost: f64,
    pub tree: CoveringTree,
    /// Tree cost under the discounted costs.
    pub tree_cost: f64,
    pub odd_vertices: Vec<VertexId>,
}

/// Runs all three phases; the returned tour always passes `verify_tour`.
pub fn run_heuristic(
    inst: &GipInstance,
    lp_values: Option<&[f64]>,
    mode: MatchingMode,
) -> Result<HeuristicOutcome, HeuristicError> {
    let discounted = discount_costs(inst, lp_values)?;
    let mut oracle = DistanceOracle::new(inst, discounted);
    let tree = build_covering_tree(inst, &mut oracle)?;
    let tree_cost = tree.cost(oracle.costs());
    let odd_vertices = tree.odd_vertices(inst);
    let mut tour = close_tree(inst, &tree, mode, &mut oracle);
    if mode == MatchingMode::Exact {
        // Keeps exact mode at least as good as greedy even when the greedy
        // pipeline ends in the fallback and the exact one does not.
        if let Ok(greedy) = close_tree(inst, &tree, MatchingMode::Greedy, &mut oracle) {
            let greedy_cheaper = tour
                .as_ref()
                .map_or(true, |t| greedy.cost(inst) < t.cost(inst));
            if greedy_cheaper {
                tour = Ok(greedy);
            }
        }
    }
    let tour = tour?;
    let cost = verify_tour(inst, &tour).map_err(|_| HeuristicError::RepairFailed)?;
    Ok(HeuristicOutcome {
        tour,
        cost,
        tree,
        tree_cost,
        odd_vertices,
    })
}
