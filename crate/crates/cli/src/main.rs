mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Graph inspection planning: generate, solve, verify and chart instances.
#[derive(Debug, Parser)]
#[command(name = "gip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a planar inspection scenario and write its instance.
    Gen(GenArgs),
    /// Solve an instance and write the report, tour and anytime log.
    Solve(SolveArgs),
    /// Check a tour against an instance and print its cost.
    Verify(VerifyArgs),
    /// Exhaustive optimum of a small instance.
    Bruteforce(BruteforceArgs),
    /// Chart the upper and lower bounds of an anytime log as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, clap::Args)]
struct GenArgs {
    /// Roadmap vertices.
    #[arg(long)]
    n: usize,
    /// Points of interest, one group each.
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// L-shaped obstacles.
    #[arg(long, default_value_t = 12)]
    obstacles: usize,
    /// Full sensor field of view in degrees.
    #[arg(long, default_value_t = 120.0)]
    fov_deg: f64,
    /// Sensor range.
    #[arg(long, default_value_t = 25.0)]
    range: f64,
    /// Roadmap steering step; a fiftieth of the workspace diagonal if unset.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance file; geometry goes next to it as `<stem>.geometry.json`.
    /// Without it the instance is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    Scf,
    Mcf,
    Cutset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleArg {
    Cc,
    Flow,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    Greedy,
    Exact,
    Off,
}

#[derive(Debug, clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = FormulationArg::Cutset)]
    formulation: FormulationArg,
    /// Separation oracle; cutset formulation only.
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    /// Groups checked per fractional candidate by the combined oracle;
    /// cutset formulation only.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Simplex iteration budget, for runs that must stop at the same point
    /// on every machine.
    #[arg(long)]
    work_limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = HeuristicArg::Greedy)]
    heuristic: HeuristicArg,
    /// Seed for group sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cover only this many groups instead of all.
    #[arg(long)]
    quota: Option<usize>,
    /// Anytime log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Incumbent tour JSON.
    #[arg(long)]
    tour: Option<PathBuf>,
    /// Report JSON; printed when unset.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    instance: PathBuf,
    tour: PathBuf,
    /// Require only this many covered groups.
    #[arg(long)]
    quota: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct BruteforceArgs {
    instance: PathBuf,
    /// Largest edge count accepted for enumeration.
    #[arg(long, default_value_t = gip_core::brute::DEFAULT_MAX_EDGES)]
    max_edges: usize,
    /// Cover only this many groups instead of all.
    #[arg(long)]
    quota: Option<usize>,
    /// Write the optimal tour here.
    #[arg(long)]
    tour: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct PlotArgs {
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Solve(args) => commands::solve(args),
        Command::Verify(args) => commands::verify(args),
        Command::Bruteforce(args) => commands::bruteforce(args),
        Command::Plot(args) => commands::plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gip: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
