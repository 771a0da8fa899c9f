use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gip_core::brute::brute_force_partial;
use gip_core::search::{read_log_csv, write_log_csv};
use gip_core::sim::{generate_scenario, ScenarioParams, SensorModel};
use gip_core::{
    add_mcf, add_partial_coverage, add_scf, build_baseline, use_group_cutset, verify_tour_quota,
    BruteForceOutcome, CoveringTreeHeuristic, CutConfig, Feasibility, FormulationError,
    FormulationHandle, GipInstance, MatchingMode, OracleKind, PrimalHeuristic, SearchConfig,
    SearchError, SolverReport, Termination, Tour, TourViolation, MCF_SIZE_GUARD,
};

use crate::plot::render_svg;
use crate::{
    BruteforceArgs, FormulationArg, GenArgs, HeuristicArg, OracleArg, PlotArgs, SolveArgs,
    VerifyArgs,
};

pub const EXIT_LIMIT_WITHOUT_INCUMBENT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;
pub const EXIT_VERIFICATION: u8 = 5;

const DEFAULT_SAMPLE_SIZE: usize = 100;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

type CliResult = Result<(), CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<GipInstance, CliError> {
    GipInstance::from_json_str(&read_file(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn geometry_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.geometry.json"))
}

fn check_quota(quota: Option<usize>, inst: &GipInstance) -> Result<usize, CliError> {
    let k = inst.num_groups();
    match quota {
        Some(q) if q > k => Err(CliError::usage(format!(
            "quota {q} exceeds the {k} groups of the instance"
        ))),
        Some(q) => Ok(q),
        None => Ok(k),
    }
}

pub fn gen(args: GenArgs) -> CliResult {
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    if !(args.fov_deg > 0.0 && args.fov_deg <= 360.0) {
        return Err(CliError::usage("--fov-deg must lie in (0, 360]"));
    }
    if !(args.range > 0.0 && args.range.is_finite()) {
        return Err(CliError::usage("--range must be positive"));
    }
    if let Some(step) = args.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::usage("--step must be positive"));
        }
    }
    let mut params = ScenarioParams::new(args.n, args.k, args.seed);
    params.workspace.obstacle_count = args.obstacles;
    params.sensor = SensorModel {
        fov_half_angle: (args.fov_deg / 2.0).to_radians(),
        range: args.range,
    };
    params.step = args.step;
    let scenario = generate_scenario(&params).map_err(|e| CliError::new(1, e.to_string()))?;
    let text = scenario.instance.to_json_string();
    match args.out {
        Some(out) => {
            write_file(&out, &text)?;
            let geometry = serde_json::to_string(&scenario.geometry).expect("geometry serializes");
            write_file(&geometry_path(&out), &geometry)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn formulate(args: &SolveArgs, inst: GipInstance) -> Result<FormulationHandle, CliError> {
    let formulation_error = |e: FormulationError| match e {
        FormulationError::TooLarge { .. } => {
            CliError::new(EXIT_RESOURCE, format!("{e}; use --formulation cutset"))
        }
        FormulationError::EmptyGroup(_) => CliError::new(EXIT_INFEASIBLE, e.to_string()),
        other => CliError::usage(other.to_string()),
    };
    let mut handle = build_baseline(inst).map_err(formulation_error)?;
    if let Some(q) = args.quota {
        handle = add_partial_coverage(handle, q).map_err(formulation_error)?;
    }
    match args.formulation {
        FormulationArg::Scf => add_scf(handle),
        FormulationArg::Mcf => add_mcf(handle, MCF_SIZE_GUARD),
        FormulationArg::Cutset => use_group_cutset(handle),
    }
    .map_err(formulation_error)
}

fn write_outputs(
    args: &SolveArgs,
    inst: &GipInstance,
    report: &SolverReport,
    wall_s: f64,
) -> CliResult {
    if let Some(path) = &args.log {
        let mut bytes = Vec::new();
        write_log_csv(&report.log, &mut bytes).map_err(|e| CliError::usage(e.to_string()))?;
        write_file(path, &String::from_utf8(bytes).expect("csv is utf-8"))?;
    }
    if let (Some(path), Some(tour)) = (&args.tour, &report.tour) {
        write_file(path, &tour.to_json_string(inst))?;
    }
    let summary =
        serde_json::to_string_pretty(&report.summary(inst, wall_s)).expect("report serializes");
    match &args.report {
        Some(path) => write_file(path, &summary),
        None => {
            println!("{summary}");
            Ok(())
        }
    }
}

pub fn solve(args: SolveArgs) -> CliResult {
    let cutset = args.formulation == FormulationArg::Cutset;
    if !cutset && (args.oracle.is_some() || args.sample_size.is_some()) {
        return Err(CliError::usage(
            "--oracle and --sample-size need --formulation cutset",
        ));
    }
    let sample_size = args.sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE);
    if sample_size == 0 {
        return Err(CliError::usage("--sample-size must be at least 1"));
    }
    if args.time_limit.is_nan() || args.time_limit < 0.0 {
        return Err(CliError::usage("--time-limit must be non-negative"));
    }
    let inst = load_instance(&args.instance)?;
    check_quota(args.quota, &inst)?;
    let start = Instant::now();

    let report = if args.quota.is_none() && inst.feasibility() != Feasibility::Feasible {
        SolverReport {
            termination: Termination::Infeasible,
            ..SolverReport::default()
        }
    } else {
        let handle = formulate(&args, inst.clone())?;
        let heuristic = match args.heuristic {
            HeuristicArg::Greedy => Some(CoveringTreeHeuristic {
                mode: MatchingMode::Greedy,
            }),
            HeuristicArg::Exact => Some(CoveringTreeHeuristic {
                mode: MatchingMode::Exact,
            }),
            HeuristicArg::Off => None,
        };
        let heuristic = heuristic.as_ref().map(|h| h as &dyn PrimalHeuristic);
        let mut config = SearchConfig::with_time_limit(args.time_limit);
        if let Some(work) = args.work_limit {
            config = config.with_work_limit(work);
        }
        let result = if cutset {
            let cuts = CutConfig {
                oracle: match args.oracle.unwrap_or(OracleArg::Combined) {
                    OracleArg::Cc => OracleKind::Connectivity,
                    OracleArg::Flow => OracleKind::Flow,
                    OracleArg::Combined => OracleKind::Combined,
                },
                sample_size,
                seed: args.seed,
            };
            gip_core::solve_bnc(&handle, &config, &cuts, heuristic)
        } else {
            gip_core::solve_bnb(&handle, &config, heuristic)
        };
        match result {
            Ok(report) => report,
            Err(SearchError::InfeasibleModel) => SolverReport {
                termination: Termination::Infeasible,
                ..SolverReport::default()
            },
            Err(e) => return Err(CliError::new(1, e.to_string())),
        }
    };
    let wall_s = start.elapsed().as_secs_f64();
    write_outputs(&args, &inst, &report, wall_s)?;
    match report.termination {
        Termination::Optimal => Ok(()),
        Termination::Infeasible => Err(CliError::new(EXIT_INFEASIBLE, "instance is infeasible")),
        Termination::TimeLimit | Termination::WorkLimit if report.tour.is_some() => Ok(()),
        Termination::TimeLimit | Termination::WorkLimit => Err(CliError::new(
            EXIT_LIMIT_WITHOUT_INCUMBENT,
            "limit reached without a feasible tour",
        )),
    }
}

pub fn verify(args: VerifyArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let quota = check_quota(args.quota, &inst)?;
    let text = read_file(&args.tour)?;
    let parsed = Tour::from_json_str(&inst, &text)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.tour.display())))?;
    let cost = parsed
        .and_then(|tour| verify_tour_quota(&inst, &tour, quota))
        .map_err(|v| {
            let detail = match v {
                TourViolation::GroupUncovered(group) => format!("group {group} is not covered"),
                other => other.to_string(),
            };
            CliError::new(EXIT_VERIFICATION, format!("infeasible tour: {detail}"))
        })?;
    println!("{cost}");
    Ok(())
}

pub fn bruteforce(args: BruteforceArgs) -> CliResult {
    let inst = load_instance(&args.instance)?;
    let quota = check_quota(args.quota, &inst)?;
    let outcome = brute_force_partial(&inst, args.max_edges, quota)
        .map_err(|e| CliError::new(EXIT_RESOURCE, e.to_string()))?;
    match outcome {
        BruteForceOutcome::Infeasible => {
            Err(CliError::new(EXIT_INFEASIBLE, "instance is infeasible"))
        }
        BruteForceOutcome::Optimal { cost, tour } => {
            if let Some(path) = &args.tour {
                write_file(path, &tour.to_json_string(&inst))?;
            }
            println!("{cost}");
            Ok(())
        }
    }
}

pub fn plot(args: PlotArgs) -> CliResult {
    let file = fs::File::open(&args.log)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.log.display())))?;
    let log = read_log_csv(io::BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", args.log.display())))?;
    if log.is_empty() {
        return Err(CliError::usage(format!(
            "{} has no rows",
            args.log.display()
        )));
    }
    write_file(&args.out, &render_svg(&log))
}
