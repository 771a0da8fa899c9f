//! Inspection instances, coverage maps, tours and the graph primitives shared
//! by the solvers.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
    pub cost: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("instance has no vertices")]
    NoVertices,
    #[error("root {0} is not a vertex")]
    RootOutOfRange(VertexId),
    #[error("edge {index} ({tail}, {head}) references a missing vertex")]
    VertexOutOfRange {
        index: usize,
        tail: VertexId,
        head: VertexId,
    },
    #[error("edge {index} is a self loop on vertex {vertex}")]
    SelfLoop { index: usize, vertex: VertexId },
    #[error("duplicate directed edge ({tail}, {head})")]
    DuplicateEdge { tail: VertexId, head: VertexId },
    #[error("edge {index} has invalid cost {cost}")]
    InvalidCost { index: usize, cost: f64 },
    #[error("group {group} contains missing vertex {vertex}")]
    GroupMemberOutOfRange { group: usize, vertex: VertexId },
    #[error("vertex {vertex} covers POI {poi} but only {poi_count} POIs exist")]
    PoiOutOfRange {
        vertex: VertexId,
        poi: usize,
        poi_count: usize,
    },
    #[error("coverage lists {got} vertices, expected {expected}")]
    CoverageLength { got: usize, expected: usize },
    #[error("groups do not match the inverted coverage map (first mismatch at group {0})")]
    CoverageMismatch(usize),
    #[error("instance file has neither groups nor coverage")]
    MissingGroups,
    #[error("malformed instance file: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Per-vertex sets of inspected points of interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    poi_count: usize,
    by_vertex: Vec<Vec<usize>>,
}

impl CoverageMap {
    pub fn new(poi_count: usize, by_vertex: Vec<Vec<usize>>) -> Result<Self, InstanceError> {
        let mut normalized = Vec::with_capacity(by_vertex.len());
        for (vertex, pois) in by_vertex.into_iter().enumerate() {
            if let Some(&poi) = pois.iter().find(|&&p| p >= poi_count) {
                return Err(InstanceError::PoiOutOfRange {
                    vertex,
                    poi,
                    poi_count,
                });
            }
            let set: BTreeSet<usize> = pois.into_iter().collect();
            normalized.push(set.into_iter().collect());
        }
        Ok(Self {
            poi_count,
            by_vertex: normalized,
        })
    }

    pub fn poi_count(&self) -> usize {
        self.poi_count
    }

    pub fn num_vertices(&self) -> usize {
        self.by_vertex.len()
    }

    /// Sorted POI ids seen from `vertex`.
    pub fn pois(&self, vertex: VertexId) -> &[usize] {
        &self.by_vertex[vertex]
    }

    pub fn by_vertex(&self) -> &[Vec<usize>] {
        &self.by_vertex
    }
}

/// Turns a coverage map into one vertex group per POI: group `p` holds every
/// vertex whose coverage contains `p`, in increasing vertex order.
pub fn invert_coverage(coverage: &CoverageMap) -> Vec<Vec<VertexId>> {
    let mut groups = vec![Vec::new(); coverage.poi_count];
    for (vertex, pois) in coverage.by_vertex.iter().enumerate() {
        for &poi in pois {
            groups[poi].push(vertex);
        }
    }
    groups
}

/// A graph inspection planning instance in group-covering form.
#[derive(Debug, Clone)]
pub struct GipInstance {
    num_vertices: usize,
    root: VertexId,
    edges: Vec<Edge>,
    groups: Vec<Vec<VertexId>>,
    coverage: Option<CoverageMap>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    lookup: HashMap<(VertexId, VertexId), EdgeId>,
    strictly_positive_costs: bool,
}

impl GipInstance {
    /// Validates and indexes an instance. Group members are sorted and
    /// deduplicated. Empty groups are accepted here; they make the instance
    /// infeasible, which [`GipInstance::feasibility`] reports.
    pub fn new(
        num_vertices: usize,
        root: VertexId,
        edges: Vec<Edge>,
        groups: Vec<Vec<VertexId>>,
    ) -> Result<Self, InstanceError> {
        if num_vertices == 0 {
            return Err(InstanceError::NoVertices);
        }
        if root >= num_vertices {
            return Err(InstanceError::RootOutOfRange(root));
        }
        let mut out_edges = vec![Vec::new(); num_vertices];
        let mut in_edges = vec![Vec::new(); num_vertices];
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut strictly_positive_costs = true;
        for (index, e) in edges.iter().enumerate() {
            if e.tail >= num_vertices || e.head >= num_vertices {
                return Err(InstanceError::VertexOutOfRange {
                    index,
                    tail: e.tail,
                    head: e.head,
                });
            }
            if e.tail == e.head {
                return Err(InstanceError::SelfLoop {
                    index,
                    vertex: e.tail,
                });
            }
            if !e.cost.is_finite() || e.cost < 0.0 {
                return Err(InstanceError::InvalidCost {
                    index,
                    cost: e.cost,
                });
            }
            if lookup.insert((e.tail, e.head), index).is_some() {
                return Err(InstanceError::DuplicateEdge {
                    tail: e.tail,
                    head: e.head,
                });
            }
            strictly_positive_costs &= e.cost > 0.0;
            out_edges[e.tail].push(index);
            in_edges[e.head].push(index);
        }
        let mut normalized = Vec::with_capacity(groups.len());
        for (group, members) in groups.into_iter().enumerate() {
            if let Some(&vertex) = members.iter().find(|&&v| v >= num_vertices) {
                return Err(InstanceError::GroupMemberOutOfRange { group, vertex });
            }
            let set: BTreeSet<VertexId> = members.into_iter().collect();
            normalized.push(set.into_iter().collect());
        }
        Ok(Self {
            num_vertices,
            root,
            edges,
            groups: normalized,
            coverage: None,
            out_edges,
            in_edges,
            lookup,
            strictly_positive_costs,
        })
    }

    /// Builds an instance whose groups are the inverted coverage map.
    pub fn with_coverage(
        num_vertices: usize,
        root: VertexId,
        edges: Vec<Edge>,
        coverage: CoverageMap,
    ) -> Result<Self, InstanceError> {
        if coverage.num_vertices() != num_vertices {
            return Err(InstanceError::CoverageLength {
                got: coverage.num_vertices(),
                expected: num_vertices,
            });
        }
        let groups = invert_coverage(&coverage);
        let mut inst = Self::new(num_vertices, root, edges, groups)?;
        inst.coverage = Some(coverage);
        Ok(inst)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn groups(&self) -> &[Vec<VertexId>] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &[VertexId] {
        &self.groups[i]
    }

    pub fn coverage(&self) -> Option<&CoverageMap> {
        self.coverage.as_ref()
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn edge_between(&self, tail: VertexId, head: VertexId) -> Option<EdgeId> {
        self.lookup.get(&(tail, head)).copied()
    }

    pub fn strictly_positive_costs(&self) -> bool {
        self.strictly_positive_costs
    }

    pub fn costs(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.cost).collect()
    }

    /// Membership table: `table[v]` lists the groups containing `v`.
    pub fn groups_of_vertices(&self) -> Vec<Vec<usize>> {
        let mut table = vec![Vec::new(); self.num_vertices];
        for (i, g) in self.groups.iter().enumerate() {
            for &v in g {
                table[v].push(i);
            }
        }
        table
    }

    /// A group is coverable iff one of its members lies on a closed walk
    /// through the root, i.e. in the strongly connected component of the root
    /// of the full graph, and the root has at least one outgoing edge.
    pub fn feasibility(&self) -> Feasibility {
        let all = vec![true; self.edges.len()];
        let component = root_scc(self, &all);
        let uncoverable: Vec<usize> = self
            .groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.iter().any(|&v| component[v]))
            .map(|(i, _)| i)
            .collect();
        let root_isolated = component.iter().filter(|&&c| c).count() < 2;
        if uncoverable.is_empty() && !root_isolated {
            Feasibility::Feasible
        } else {
            Feasibility::Infeasible {
                uncoverable_groups: uncoverable,
            }
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
        file.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path).map_err(|e| InstanceError::Io(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        fs::write(path, self.to_json_string()).map_err(|e| InstanceError::Io(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    /// `uncoverable_groups` may be empty when the root has no closed walk at all.
    Infeasible {
        uncoverable_groups: Vec<usize>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CoverageFile {
    poi_count: usize,
    by_vertex: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    num_vertices: usize,
    root: VertexId,
    edges: Vec<(VertexId, VertexId, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<Vec<VertexId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coverage: Option<CoverageFile>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<GipInstance, InstanceError> {
        let edges = self
            .edges
            .into_iter()
            .map(|(tail, head, cost)| Edge { tail, head, cost })
            .collect();
        match (self.groups, self.coverage) {
            (Some(groups), None) => GipInstance::new(self.num_vertices, self.root, edges, groups),
            (groups, Some(cov)) => {
                let coverage = CoverageMap::new(cov.poi_count, cov.by_vertex)?;
                let inst =
                    GipInstance::with_coverage(self.num_vertices, self.root, edges, coverage)?;
                if let Some(groups) = groups {
                    if groups.len() != inst.num_groups() {
                        return Err(InstanceError::CoverageMismatch(
                            groups.len().min(inst.num_groups()),
                        ));
                    }
                    for (i, g) in groups.into_iter().enumerate() {
                        let set: BTreeSet<VertexId> = g.into_iter().collect();
                        if !set.iter().copied().eq(inst.group(i).iter().copied()) {
                            return Err(InstanceError::CoverageMismatch(i));
                        }
                    }
                }
                Ok(inst)
            }
            (None, None) => Err(InstanceError::MissingGroups),
        }
    }
}

impl From<&GipInstance> for InstanceFile {
    fn from(inst: &GipInstance) -> Self {
        InstanceFile {
            num_vertices: inst.num_vertices,
            root: inst.root,
            edges: inst
                .edges
                .iter()
                .map(|e| (e.tail, e.head, e.cost))
                .collect(),
            groups: Some(inst.groups.clone()),
            coverage: inst.coverage.as_ref().map(|c| CoverageFile {
                poi_count: c.poi_count,
                by_vertex: c.by_vertex.clone(),
            }),
        }
    }
}

/// A closed walk from the root, stored as an ordered list of edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tour {
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TourFile {
    edges: Vec<(VertexId, VertexId)>,
}

impl Tour {
    pub fn new(edges: Vec<EdgeId>) -> Self {
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Resolves `(tail, head)` pairs against the instance.
    pub fn from_pairs(
        inst: &GipInstance,
        pairs: &[(VertexId, VertexId)],
    ) -> Result<Self, TourViolation> {
        pairs
            .iter()
            .enumerate()
            .map(|(position, &(u, v))| {
                inst.edge_between(u, v)
                    .ok_or(TourViolation::UnknownEdge { position })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Tour::new)
    }

    pub fn from_vertices(inst: &GipInstance, walk: &[VertexId]) -> Result<Self, TourViolation> {
        let pairs: Vec<_> = walk.windows(2).map(|w| (w[0], w[1])).collect();
        Self::from_pairs(inst, &pairs)
    }

    pub fn pairs(&self, inst: &GipInstance) -> Vec<(VertexId, VertexId)> {
        self.edges
            .iter()
            .map(|&e| (inst.edge(e).tail, inst.edge(e).head))
            .collect()
    }

    /// Vertex sequence of the walk, starting and ending at the first tail.
    pub fn vertices(&self, inst: &GipInstance) -> Vec<VertexId> {
        let mut walk = Vec::with_capacity(self.edges.len() + 1);
        if let Some(&first) = self.edges.first() {
            walk.push(inst.edge(first).tail);
        }
        walk.extend(self.edges.iter().map(|&e| inst.edge(e).head));
        walk
    }

    pub fn cost(&self, inst: &GipInstance) -> f64 {
        self.edges.iter().map(|&e| inst.edge(e).cost).sum()
    }

    pub fn to_json_string(&self, inst: &GipInstance) -> String {
        serde_json::to_string(&TourFile {
            edges: self.pairs(inst),
        })
        .expect("tour serializes")
    }

    /// Parses `{"edges": [[u, v], ...]}`. Structural problems are JSON errors;
    /// pairs that are not instance edges surface as [`TourViolation::UnknownEdge`].
    pub fn from_json_str(
        inst: &GipInstance,
        text: &str,
    ) -> Result<Result<Self, TourViolation>, String> {
        let file: TourFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(Self::from_pairs(inst, &file.edges))
    }
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum TourViolation {
    #[error("tour is not a closed walk from the root")]
    NotClosed,
    #[error("edge at position {position} does not start where the previous edge ended")]
    BrokenChain { position: usize },
    #[error("edge at position {position} is not in the instance")]
    UnknownEdge { position: usize },
    #[error("edge {edge} is traversed more than once")]
    RepeatedEdge { edge: EdgeId },
    #[error("group {0} is not covered")]
    GroupUncovered(usize),
}

/// Checks that `tour` is a feasible inspection tour and returns its cost.
pub fn verify_tour(inst: &GipInstance, tour: &Tour) -> Result<f64, TourViolation> {
    verify_tour_quota(inst, tour, inst.num_groups())
}

/// As [`verify_tour`], but only `min_covered` groups need to be visited.
pub fn verify_tour_quota(
    inst: &GipInstance,
    tour: &Tour,
    min_covered: usize,
) -> Result<f64, TourViolation> {
    if let Some(position) = tour.edges.iter().position(|&e| e >= inst.num_edges()) {
        return Err(TourViolation::UnknownEdge { position });
    }
    let (Some(&first), Some(&last)) = (tour.edges.first(), tour.edges.last()) else {
        return Err(TourViolation::NotClosed);
    };
    if inst.edge(first).tail != inst.root {
        return Err(TourViolation::NotClosed);
    }
    for (position, pair) in tour.edges.windows(2).enumerate() {
        if inst.edge(pair[0]).head != inst.edge(pair[1]).tail {
            return Err(TourViolation::BrokenChain {
                position: position + 1,
            });
        }
    }
    if inst.edge(last).head != inst.root {
        return Err(TourViolation::NotClosed);
    }
    let mut used = vec![false; inst.num_edges()];
    let mut visited = vec![false; inst.num_vertices];
    visited[inst.root] = true;
    for &e in &tour.edges {
        if std::mem::replace(&mut used[e], true) {
            return Err(TourViolation::RepeatedEdge { edge: e });
        }
        visited[inst.edge(e).head] = true;
    }
    let covered: Vec<bool> = inst
        .groups
        .iter()
        .map(|g| g.iter().any(|&v| visited[v]))
        .collect();
    if covered.iter().filter(|&&c| c).count() < min_covered {
        let i = covered
            .iter()
            .position(|&c| !c)
            .expect("some group is uncovered");
        return Err(TourViolation::GroupUncovered(i));
    }
    Ok(tour.cost(inst))
}

/// Vertices reachable from `source` along edges with `selected[e]`.
pub fn reachable_from(inst: &GipInstance, source: VertexId, selected: &[bool]) -> Vec<bool> {
    search(inst, source, selected, false)
}

/// Vertices that reach `target` along edges with `selected[e]`.
pub fn reaching(inst: &GipInstance, target: VertexId, selected: &[bool]) -> Vec<bool> {
    search(inst, target, selected, true)
}

fn search(inst: &GipInstance, start: VertexId, selected: &[bool], backward: bool) -> Vec<bool> {
    let mut seen = vec![false; inst.num_vertices];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        let incident = if backward {
            &inst.in_edges[u]
        } else {
            &inst.out_edges[u]
        };
        for &e in incident {
            if !selected[e] {
                continue;
            }
            let edge = &inst.edges[e];
            let w = if backward { edge.tail } else { edge.head };
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Strongly connected component of the root in the subgraph of selected edges.
pub fn root_scc(inst: &GipInstance, selected: &[bool]) -> Vec<bool> {
    let fwd = reachable_from(inst, inst.root, selected);
    let bwd = reaching(inst, inst.root, selected);
    fwd.iter().zip(&bwd).map(|(&a, &b)| a && b).collect()
}

/// Eulerian circuit from `start` over every edge in `selected` (each used once).
/// Returns `None` when the selection is not a single balanced component
/// reachable from `start`.
pub fn euler_circuit(inst: &GipInstance, selected: &[EdgeId], start: VertexId) -> Option<Tour> {
    if selected.is_empty() {
        return Some(Tour::default());
    }
    let mut adjacency: Vec<Vec<EdgeId>> = vec![Vec::new(); inst.num_vertices];
    let mut balance = vec![0i64; inst.num_vertices];
    for &e in selected {
        let edge = inst.edge(e);
        adjacency[edge.tail].push(e);
        balance[edge.tail] += 1;
        balance[edge.head] -= 1;
    }
    if balance.iter().any(|&b| b != 0) {
        return None;
    }
    // Pop from the back, so reverse to consume lower edge ids first.
    for adj in &mut adjacency {
        adj.reverse();
    }
    let mut stack: Vec<(VertexId, Option<EdgeId>)> = vec![(start, None)];
    let mut circuit = Vec::with_capacity(selected.len());
    while let Some(&(v, via)) = stack.last() {
        if let Some(e) = adjacency[v].pop() {
            stack.push((inst.edge(e).head, Some(e)));
        } else {
            stack.pop();
            if let Some(e) = via {
                circuit.push(e);
            }
        }
    }
    if circuit.len() != selected.len() {
        return None;
    }
    circuit.reverse();
    Some(Tour::new(circuit))
}

/// The edges of `selected` lying in the root's strongly connected component.
/// Under degree balance this drops exactly the closed walks not touching the
/// root.
pub fn root_component_edges(inst: &GipInstance, selected: &[EdgeId]) -> Vec<EdgeId> {
    let mut mask = vec![false; inst.num_edges()];
    for &e in selected {
        mask[e] = true;
    }
    let component = root_scc(inst, &mask);
    selected
        .iter()
        .copied()
        .filter(|&e| component[inst.edge(e).tail] && component[inst.edge(e).head])
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn complete(n: usize, cost: f64) -> Vec<Edge> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    edges.push(Edge {
                        tail: u,
                        head: v,
                        cost,
                    });
                }
            }
        }
        edges
    }

    /// Triangle with all six unit arcs, root 0, groups {1} and {2}.
    pub fn t3() -> GipInstance {
        GipInstance::new(3, 0, complete(3, 1.0), vec![vec![1], vec![2]]).unwrap()
    }

    /// Two vertices joined both ways, group {1}.
    pub fn p2() -> GipInstance {
        let edges = vec![
            Edge {
                tail: 0,
                head: 1,
                cost: 1.0,
            },
            Edge {
                tail: 1,
                head: 0,
                cost: 1.0,
            },
        ];
        GipInstance::new(2, 0, edges, vec![vec![1]]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn invert_coverage_examples() {
        // a = 0, b = 1
        let cov = CoverageMap::new(2, vec![vec![], vec![0], vec![0, 1]]).unwrap();
        assert_eq!(invert_coverage(&cov), vec![vec![1, 2], vec![2]]);

        let cov = CoverageMap::new(2, vec![vec![], vec![]]).unwrap();
        assert_eq!(invert_coverage(&cov), vec![Vec::<usize>::new(), vec![]]);

        let cov = CoverageMap::new(1, vec![vec![0], vec![0], vec![0]]).unwrap();
        assert_eq!(invert_coverage(&cov), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn coverage_rejects_unknown_poi() {
        assert!(matches!(
            CoverageMap::new(1, vec![vec![3]]),
            Err(InstanceError::PoiOutOfRange { poi: 3, .. })
        ));
    }

    #[test]
    fn verify_t3_tours() {
        let t3 = t3();
        let tour = Tour::from_vertices(&t3, &[0, 1, 2, 0]).unwrap();
        assert_eq!(verify_tour(&t3, &tour), Ok(3.0));

        let tour = Tour::from_vertices(&t3, &[0, 1, 0]).unwrap();
        assert_eq!(
            verify_tour(&t3, &tour),
            Err(TourViolation::GroupUncovered(1))
        );

        let tour = Tour::from_vertices(&t3, &[0, 1, 2]).unwrap();
        assert_eq!(verify_tour(&t3, &tour), Err(TourViolation::NotClosed));
    }

    #[test]
    fn verify_reports_each_violation() {
        let t3 = t3();
        let e = |u, v| t3.edge_between(u, v).unwrap();
        assert_eq!(
            verify_tour(&t3, &Tour::new(vec![e(0, 1), e(2, 0)])),
            Err(TourViolation::BrokenChain { position: 1 })
        );
        assert_eq!(
            verify_tour(&t3, &Tour::new(vec![e(0, 1), 99])),
            Err(TourViolation::UnknownEdge { position: 1 })
        );
        let repeated = vec![e(0, 1), e(1, 0), e(0, 1), e(1, 2), e(2, 0)];
        assert_eq!(
            verify_tour(&t3, &Tour::new(repeated)),
            Err(TourViolation::RepeatedEdge { edge: e(0, 1) })
        );
        assert_eq!(
            verify_tour(&t3, &Tour::default()),
            Err(TourViolation::NotClosed)
        );
        assert_eq!(
            Tour::from_pairs(&t3, &[(0, 0)]),
            Err(TourViolation::UnknownEdge { position: 0 })
        );
    }

    #[test]
    fn instance_validation() {
        let edge = |tail, head, cost| Edge { tail, head, cost };
        assert_eq!(
            GipInstance::new(2, 0, vec![edge(0, 1, 1.0), edge(0, 1, 2.0)], vec![]).unwrap_err(),
            InstanceError::DuplicateEdge { tail: 0, head: 1 }
        );
        assert!(matches!(
            GipInstance::new(2, 0, vec![edge(0, 0, 1.0)], vec![]),
            Err(InstanceError::SelfLoop { .. })
        ));
        assert!(matches!(
            GipInstance::new(2, 0, vec![edge(0, 1, -1.0)], vec![]),
            Err(InstanceError::InvalidCost { .. })
        ));
        assert!(matches!(
            GipInstance::new(2, 5, vec![], vec![]),
            Err(InstanceError::RootOutOfRange(5))
        ));
        assert!(matches!(
            GipInstance::new(2, 0, vec![], vec![vec![7]]),
            Err(InstanceError::GroupMemberOutOfRange {
                group: 0,
                vertex: 7
            })
        ));
        let zero =
            GipInstance::new(2, 0, vec![edge(0, 1, 0.0), edge(1, 0, 1.0)], vec![vec![1]]).unwrap();
        assert!(!zero.strictly_positive_costs());
        assert!(t3().strictly_positive_costs());
    }

    #[test]
    fn feasibility_flags_empty_and_unreachable_groups() {
        assert_eq!(t3().feasibility(), Feasibility::Feasible);
        let edges = vec![
            Edge {
                tail: 0,
                head: 1,
                cost: 1.0,
            },
            Edge {
                tail: 1,
                head: 0,
                cost: 1.0,
            },
            Edge {
                tail: 0,
                head: 2,
                cost: 1.0,
            },
        ];
        let inst = GipInstance::new(3, 0, edges, vec![vec![1], vec![2], vec![]]).unwrap();
        assert_eq!(
            inst.feasibility(),
            Feasibility::Infeasible {
                uncoverable_groups: vec![1, 2]
            }
        );
    }

    #[test]
    fn root_may_belong_to_a_group() {
        let inst = GipInstance::new(2, 0, p2().edges().to_vec(), vec![vec![0]]).unwrap();
        let tour = Tour::from_vertices(&inst, &[0, 1, 0]).unwrap();
        assert_eq!(verify_tour(&inst, &tour), Ok(2.0));
    }

    #[test]
    fn json_roundtrip_and_coverage_check() {
        let t3 = t3();
        let back = GipInstance::from_json_str(&t3.to_json_string()).unwrap();
        assert_eq!(back.edges(), t3.edges());
        assert_eq!(back.groups(), t3.groups());

        let text = r#"{"num_vertices": 3, "root": 0,
            "edges": [[0,1,1.0],[1,0,1.0],[0,2,1.0],[2,0,1.0]],
            "groups": [[1],[2]],
            "coverage": {"poi_count": 2, "by_vertex": [[],[0],[1]]}}"#;
        assert!(GipInstance::from_json_str(text).is_ok());
        let bad = text.replace(r#""groups": [[1],[2]]"#, r#""groups": [[2],[1]]"#);
        assert_eq!(
            GipInstance::from_json_str(&bad).unwrap_err(),
            InstanceError::CoverageMismatch(0)
        );
        let only_cov = text.replace(r#""groups": [[1],[2]],"#, "");
        assert_eq!(
            GipInstance::from_json_str(&only_cov).unwrap().groups(),
            t3.groups()
        );
        assert!(matches!(
            GipInstance::from_json_str("{\"num_vertices\": 1}"),
            Err(InstanceError::Parse(_))
        ));
    }

    #[test]
    fn tour_file_roundtrip() {
        let t3 = t3();
        let tour = Tour::from_vertices(&t3, &[0, 2, 1, 0]).unwrap();
        let text = tour.to_json_string(&t3);
        assert_eq!(text, r#"{"edges":[[0,2],[2,1],[1,0]]}"#);
        assert_eq!(Tour::from_json_str(&t3, &text).unwrap().unwrap(), tour);
        assert!(Tour::from_json_str(&t3, "[1,2").is_err());
    }

    #[test]
    fn euler_circuit_covers_selection() {
        let t3 = t3();
        let e = |u, v| t3.edge_between(u, v).unwrap();
        let sel = vec![e(1, 2), e(0, 1), e(2, 0), e(0, 2), e(2, 1), e(1, 0)];
        let tour = euler_circuit(&t3, &sel, 0).unwrap();
        assert_eq!(tour.len(), 6);
        assert!(verify_tour(&t3, &tour).is_ok());
        assert!(euler_circuit(&t3, &[e(0, 1)], 0).is_none());
        // disconnected: 2-cycle away from root plus root cycle
        let sel = vec![e(1, 2), e(2, 1)];
        assert!(euler_circuit(&t3, &sel, 0).is_none());
    }

    fn random_coverage() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
        (1usize..6).prop_flat_map(|pois| {
            (
                Just(pois),
                proptest::collection::vec(proptest::collection::vec(0..pois, 0..4), 1..8),
            )
        })
    }

    proptest! {
        #[test]
        fn inversion_reexpands_to_the_same_map((pois, by_vertex) in random_coverage()) {
            let cov = CoverageMap::new(pois, by_vertex).unwrap();
            let groups = invert_coverage(&cov);
            let mut rebuilt = vec![Vec::new(); cov.num_vertices()];
            for (p, g) in groups.iter().enumerate() {
                for &v in g {
                    rebuilt[v].push(p);
                }
            }
            prop_assert_eq!(rebuilt.as_slice(), cov.by_vertex());
        }

        #[test]
        fn accepted_tours_are_degree_balanced(walk in proptest::collection::vec(0usize..4, 1..10)) {
            let mut edges = Vec::new();
            for u in 0..4 {
                for v in 0..4 {
                    if u != v {
                        edges.push(Edge { tail: u, head: v, cost: 1.0 });
                    }
                }
            }
            let inst = GipInstance::new(4, 0, edges, vec![]).unwrap();
            let mut vertices = vec![0];
            vertices.extend(walk);
            vertices.push(0);
            vertices.dedup();
            if let Ok(tour) = Tour::from_vertices(&inst, &vertices) {
                if verify_tour(&inst, &tour).is_ok() {
                    let mut net = [0i32; 4];
                    for &e in &tour.edges {
                        net[inst.edge(e).tail] += 1;
                        net[inst.edge(e).head] -= 1;
                    }
                    prop_assert!(net.iter().all(|&d| d == 0));
                }
            }
        }
    }
}
