//! Experiment harness: single runs, grid sweeps, deterministic
//! replays, CSV reports, and attention-parameter search, all over the
//! cogmesh simulator. Runs may execute in parallel; every file is
//! written by the main thread after results are collected, so output
//! bytes never depend on scheduling.

mod learn;
mod plan;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cogmesh::procedural::TuningMode;
use cogmesh::sim::csv_header;
use cogmesh::{simulate_run, RunMode, RunOutcome, SimConfig};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "cogmesh", version, about = "Decentralized service-composition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configuration for one or more seeds.
    Run(RunArgs),
    /// Execute a mobility × density × length grid and write the
    /// aggregate table.
    Sweep(SweepArgs),
    /// Re-execute a recorded experiment and dump its request traces.
    Replay(ReplayArgs),
    /// Aggregate metrics CSVs into a per-cell summary.
    Report(ReportArgs),
    /// Search the attention parameters by hill climbing and write the
    /// best configuration found.
    LearnParams(LearnArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration TOML; absent keys keep their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base RNG seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: one per core).
    #[arg(long, value_name = "N")]
    parallel: Option<usize>,
    /// Attention configuration: C1, C2, or a TOML parameter file.
    #[arg(long, value_name = "C1|C2|PATH")]
    attention: Option<String>,
    /// Experiment style override.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Seeds to execute.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Also write per-seed request traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Runs per grid cell.
    #[arg(long, default_value_t = 30)]
    runs: u64,
}

#[derive(Args)]
struct ReplayArgs {
    /// Experiment bundle written by `run` (experiment.toml).
    bundle: PathBuf,
    /// Replay this seed instead of the bundle's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the trace and metrics row into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrics CSV files to aggregate.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Also write the aggregate as summary.csv into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Base configuration for the evaluation runs.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Total simulation-run budget for the search.
    #[arg(long, default_value_t = 100)]
    runs: u64,
    /// Base RNG seed for proposals and evaluations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the discovered configuration.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Ordering constraint the result must satisfy.
    #[arg(long, value_enum, default_value_t = TuningArg::Adaptive)]
    tuning: TuningArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Flexibility,
    Adaptability,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Flexibility => RunMode::Flexibility,
            ModeArg::Adaptability => RunMode::Adaptability,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TuningArg {
    GoalOriented,
    Reactive,
    Adaptive,
    ConflictSensitive,
    Neutral,
}

impl From<TuningArg> for TuningMode {
    fn from(t: TuningArg) -> Self {
        match t {
            TuningArg::GoalOriented => TuningMode::GoalOriented,
            TuningArg::Reactive => TuningMode::Reactive,
            TuningArg::Adaptive => TuningMode::Adaptive,
            TuningArg::ConflictSensitive => TuningMode::ConflictSensitive,
            TuningArg::Neutral => TuningMode::Neutral,
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Report(args) => cmd_report(args),
        Command::LearnParams(args) => cmd_learn(args),
    }
}

/// Run every (config, seed) job, optionally across worker threads.
/// Results come back in job order regardless of scheduling.
fn execute(jobs: &[(SimConfig, u64)], parallel: Option<usize>) -> Result<Vec<RunOutcome>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = parallel {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().context("cannot build worker pool")?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, seed)| simulate_run(cfg, *seed).map_err(anyhow::Error::from))
            .collect()
    })
}

fn write_metrics(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let mut text = String::from(csv_header());
    text.push('\n');
    for outcome in outcomes {
        text.push_str(&outcome.record.to_csv_row());
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Human-readable account of every request in a run.
fn trace_text(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "seed {}: {} issued, {} completed, {} failed",
        outcome.record.seed, outcome.issued, outcome.completed, outcome.failed
    )
    .unwrap();
    for req in &outcome.requests {
        let verdict = if req.completed { "completed" } else { "failed" };
        let mut notes = Vec::new();
        if req.switched {
            notes.push("goal switched");
        }
        if req.had_exec_failure {
            notes.push("execution failures");
        }
        let notes =
            if notes.is_empty() { String::new() } else { format!(" [{}]", notes.join(", ")) };
        writeln!(
            out,
            "request {} (user {}): {verdict} in {} cycles, {:.2} s{notes}",
            req.index, req.user, req.cycles, req.ct_s
        )
        .unwrap();
        for (service, realizer) in &req.executed {
            writeln!(out, "  {} via {}", service.0, realizer.0).unwrap();
        }
    }
    out
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = plan::load_config(args.common.config.as_deref())?;
    if let Some(att) = &args.common.attention {
        plan::apply_attention(&mut config, att)?;
    }
    if let Some(mode) = args.common.mode {
        config.mode = mode.into();
    }
    config.validate()?;

    let out_dir = &args.common.out;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let bundle =
        plan::Bundle { seed: args.common.seed, runs: args.runs, config: config.clone() };
    bundle.save(&out_dir.join("experiment.toml"))?;

    let jobs: Vec<(SimConfig, u64)> =
        (0..args.runs).map(|i| (config.clone(), args.common.seed + i)).collect();
    let outcomes = execute(&jobs, args.common.parallel)?;

    write_metrics(&out_dir.join("metrics.csv"), &outcomes)?;
    if args.trace {
        for outcome in &outcomes {
            let path = out_dir.join(format!("trace-{}.txt", outcome.record.seed));
            fs::write(&path, trace_text(outcome))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }

    println!("{}", csv_header());
    for outcome in &outcomes {
        println!("{}", outcome.record.to_csv_row());
    }
    log::info!("wrote {}", out_dir.join("metrics.csv").display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut sweep_plan = plan::ExperimentPlan::load(args.common.config.as_deref())?;
    if let Some(att) = &args.common.attention {
        sweep_plan.grid.attention = vec![att.clone()];
    }
    let cells = sweep_plan.cells(args.common.mode.map(Into::into))?;

    let mut jobs = Vec::with_capacity(cells.len() * args.runs as usize);
    for cell in &cells {
        for i in 0..args.runs {
            jobs.push((cell.clone(), args.common.seed + i));
        }
    }
    let outcomes = execute(&jobs, args.common.parallel)?;

    let out_dir = &args.common.out;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    write_metrics(&out_dir.join("metrics.csv"), &outcomes)?;

    let rows: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    let summary = report::summarize(&rows);
    fs::write(out_dir.join("summary.csv"), report::to_csv(&summary))
        .with_context(|| format!("cannot write {}", out_dir.join("summary.csv").display()))?;

    print!("{}", report::render(&summary));
    log::info!(
        "swept {} cells × {} runs into {}",
        cells.len(),
        args.runs,
        out_dir.display()
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let bundle = plan::Bundle::load(&args.bundle)?;
    let seed = args.seed.unwrap_or(bundle.seed);
    let outcome = simulate_run(&bundle.config, seed)?;

    println!("{}", csv_header());
    println!("{}", outcome.record.to_csv_row());
    print!("{}", trace_text(&outcome));

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let path = dir.join(format!("replay-{seed}.txt"));
        let mut text = String::new();
        writeln!(text, "{}", csv_header()).unwrap();
        writeln!(text, "{}", outcome.record.to_csv_row()).unwrap();
        text.push_str(&trace_text(&outcome));
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let rows = report::read_rows(&args.inputs)?;
    let summary = report::summarize(&rows);
    print!("{}", report::render(&summary));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        fs::write(dir.join("summary.csv"), report::to_csv(&summary))
            .with_context(|| format!("cannot write {}", dir.join("summary.csv").display()))?;
    }
    Ok(())
}

fn cmd_learn(args: LearnArgs) -> Result<()> {
    let config = plan::load_config(args.config.as_deref())?;
    let mode: TuningMode = args.tuning.into();
    let outcome = learn::hill_climb(&config, mode, args.runs, args.seed)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let path = args.out.join("learned-params.toml");
    let text = toml::to_string_pretty(&outcome.best).expect("parameters serialize");
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;

    println!(
        "best ⟨θ,π,φ,γ,δ⟩ = ⟨{},{},{},{},{}⟩  score {:.4}  ({} runs, {} accepted moves, {} constraint)",
        outcome.best.activation_threshold,
        outcome.best.mean_activation,
        outcome.best.wm_energy,
        outcome.best.goal_energy,
        outcome.best.protected_goal_energy,
        outcome.score,
        outcome.simulation_runs,
        outcome.candidates_accepted,
        mode,
    );
    println!("wrote {}", path.display());
    Ok(())
}
