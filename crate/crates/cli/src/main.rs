use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surface_ipp::harness::{cmd_ablate, cmd_compare, cmd_plot, cmd_run, output_dir, RunOptions, ScenarioConfig, StudySummary};
use surface_ipp::planner::PlannerKind;

const LOG_ENV: &str = "SURFACE_IPP_LOG";

#[derive(Parser)]
#[command(name = "surface-ipp", version, about = "Informative path planning on triangle-mesh surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one mission and write its metrics, trajectory and map snapshots.
    Run(Common),
    /// Informative planner against the coverage and random baselines.
    Compare(Common),
    /// Informative planner under the mGP, identity and random SPD priors.
    Ablate(Common),
    /// Render SVG charts for the band tables in a results directory.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (1 = sequential).
    #[arg(long)]
    parallel: Option<usize>,
    /// Planner for `run`: ipp, coverage or random.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Scenario whose output directory holds the tables.
    #[arg(long, required_unless_present = "out")]
    config: Option<PathBuf>,
    /// Results directory; overrides the one from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn load(common: &Common) -> Result<(ScenarioConfig, RunOptions), Failure> {
    let mut cfg = ScenarioConfig::load(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let method = match common.method.as_deref() {
        None => None,
        Some(m) => Some(
            PlannerKind::ALL
                .into_iter()
                .find(|k| k.name() == m)
                .ok_or_else(|| Failure::Config(format!("unknown method `{m}` (expected ipp, coverage or random)")))?,
        ),
    };
    if common.parallel == Some(0) {
        return Err(Failure::Config("--parallel must be at least 1".into()));
    }
    let opts = RunOptions {
        out: common.out.clone(),
        seed: common.seed,
        trials: common.trials,
        threads: common.parallel,
        method,
    };
    Ok((cfg, opts))
}

fn execute(command: Command) -> Result<(), Failure> {
    let runtime = |e: surface_ipp::IppError| Failure::Runtime(e.to_string());
    match command {
        Command::Run(c) => {
            let (cfg, opts) = load(&c)?;
            let s = cmd_run(&cfg, &opts).map_err(runtime)?;
            println!(
                "{} [{}]: trace {:.4} -> {:.4}, rmse {:.5} -> {:.5}, {} measurements, {:.1} s wall, output in {}",
                s.name,
                s.method,
                s.initial_trace,
                s.final_trace,
                s.initial_rmse,
                s.final_rmse,
                s.measurements,
                s.wall_seconds,
                s.out_dir.display()
            );
        }
        Command::Compare(c) => {
            let (cfg, opts) = load(&c)?;
            print_study(&cmd_compare(&cfg, &opts).map_err(runtime)?);
        }
        Command::Ablate(c) => {
            let (cfg, opts) = load(&c)?;
            print_study(&cmd_ablate(&cfg, &opts).map_err(runtime)?);
        }
        Command::Plot(p) => {
            let dir = match (p.out, p.config) {
                (Some(dir), _) => dir,
                (None, Some(path)) => {
                    let cfg = ScenarioConfig::load(&path).map_err(|e| Failure::Config(e.to_string()))?;
                    output_dir(&cfg, &RunOptions::default())
                }
                (None, None) => unreachable!("clap requires --config or --out"),
            };
            for svg in cmd_plot(&dir).map_err(runtime)? {
                println!("{}", svg.display());
            }
        }
    }
    Ok(())
}

fn print_study(s: &StudySummary) {
    println!("{} {} over {} trials ({:.1} s wall)", s.study, s.name, s.trials, s.wall_seconds);
    for series in &s.series {
        println!(
            "  {:<12} trace@B/2 {:>10.4}  trace@B {:>10.4}  rmse@B {:>9.5}",
            series.label, series.trace_mid, series.trace_final, series.rmse_final
        );
    }
    println!(
        "  clearance violations {}, measurements after budget {}; output in {}",
        s.clearance_violations,
        s.measurements_after_budget,
        s.out_dir.display()
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
