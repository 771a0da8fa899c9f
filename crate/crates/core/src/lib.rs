//! Graph inspection planning solvers.

pub mod brute;
pub mod formulation;
pub mod graph;
pub mod heuristic;
pub mod lp;
pub mod search;
pub mod separation;
pub mod sim;

pub use brute::{brute_force_optimum, brute_force_partial, BruteForceOutcome};
pub use formulation::{
    add_mcf, add_partial_coverage, add_scf, build_baseline, use_group_cutset, FormulationError,
    FormulationHandle, SecFlavor, MCF_SIZE_GUARD,
};
pub use graph::{
    invert_coverage, verify_tour, verify_tour_quota, CoverageMap, Edge, EdgeId, Feasibility,
    GipInstance, InstanceError, Tour, TourViolation, VertexId,
};
pub use heuristic::{run_heuristic, HeuristicOutcome, MatchingMode};
pub use lp::{LpError, LpSolution, LpStatus, MilpModel};
pub use search::{
    solve_bnb, solve_bnc, BoundEvent, BoundRecord, CoveringTreeHeuristic, CutConfig, OracleKind,
    PrimalHeuristic, ReportSummary, SearchConfig, SearchError, SolverReport, Termination,
};
pub use separation::{Candidate, Cut};
