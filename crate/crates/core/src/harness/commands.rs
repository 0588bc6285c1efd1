//! `run`, `compare`, `ablate` and `plot` entry points.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::plot::svg_chart;
use super::report::{bands_csv, parse_bands_csv, Metric};
use super::{ablate, compare, prepare, Prepared, PriorKind, ScenarioConfig, Study};
use crate::error::{IppError, Result};
use crate::field_map::trace_cov;
use crate::par::{with_threads, Exec};
use crate::planner::{MissionLog, PlannerKind};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    /// Worker threads; 1 runs everything sequentially.
    pub threads: Option<usize>,
    /// Planner for `run`; the informative planner when unset.
    pub method: Option<PlannerKind>,
}

impl RunOptions {
    fn exec(&self) -> Exec {
        match self.threads {
            Some(1) => Exec::Sequential,
            _ => Exec::default(),
        }
    }

    fn within<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        with_threads(self.threads.unwrap_or(0), f)
    }
}

pub fn output_dir(cfg: &ScenarioConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| IppError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| IppError::io(path, e))
}

fn with_overrides(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioConfig> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(t) = opts.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Executed samples closer than the vehicle radius, and measurements logged
/// after the budget.
pub fn safety_counts(p: &Prepared, logs: &[MissionLog]) -> (usize, usize) {
    let mut violations = 0;
    let mut late = 0;
    for log in logs {
        violations += log
            .executed_positions(p.scene.step)
            .iter()
            .filter(|q| p.scene.world.distance_at(q) < p.scene.lim.radius)
            .count();
        late += log.events.iter().filter(|e| e.t > p.cfg.planner.budget).count();
    }
    (violations, late)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub method: String,
    pub seed: u64,
    pub facets: usize,
    pub initial_trace: f64,
    pub final_trace: f64,
    pub initial_rmse: f64,
    pub final_rmse: f64,
    pub measurements: usize,
    pub flight_time: f64,
    pub wall_seconds: f64,
    pub out_dir: PathBuf,
}

pub fn cmd_run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let clock = Instant::now();
    let cfg = with_overrides(cfg, opts)?;
    let out = output_dir(&cfg, opts);
    let method = opts.method.unwrap_or(PlannerKind::Ipp);
    let (p, log) = opts.within(|| -> Result<_> {
        let p = prepare(&cfg)?;
        let log = p.run_trial(method, PriorKind::Mgp, 0, opts.exec())?;
        Ok((p, log))
    })?;
    write(&out.join("metrics.csv"), &log.metrics_csv())?;
    write(&out.join("trajectory.csv"), &log.trajectory_csv(2.0))?;
    write(&out.join("map_initial.csv"), &p.prior.to_csv())?;
    write(&out.join("map_final.csv"), &log.final_map.to_csv())?;
    let first = log.events[0];
    let last = *log.final_event();
    let summary = RunSummary {
        name: cfg.name.clone(),
        method: method.name().into(),
        seed: cfg.seed,
        facets: p.scene.mesh.len(),
        initial_trace: first.trace,
        final_trace: trace_cov(&log.final_map),
        initial_rmse: first.rmse,
        final_rmse: last.rmse,
        measurements: log.events.len() - 1,
        flight_time: log.flight_time(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        out_dir: out.clone(),
    };
    write(&out.join("summary.json"), &to_json(&summary)?)?;
    log::info!("run `{}` ({}): trace {:.3} → {:.3}, rmse {:.4} → {:.4}", cfg.name, method.name(), summary.initial_trace, summary.final_trace, summary.initial_rmse, summary.final_rmse);
    Ok(summary)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| IppError::Config(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSummary {
    pub label: String,
    pub trace_initial: f64,
    pub trace_mid: f64,
    pub trace_final: f64,
    pub rmse_mid: f64,
    pub rmse_final: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub study: String,
    pub name: String,
    pub trials: usize,
    pub budget: f64,
    pub band: String,
    pub pairing: String,
    pub series: Vec<SeriesSummary>,
    pub clearance_violations: usize,
    pub measurements_after_budget: usize,
    pub wall_seconds: f64,
    pub out_dir: PathBuf,
}

fn summarize(study_name: &str, p: &Prepared, study: &Study, trials: usize, started: Instant, out: &Path) -> StudySummary {
    let b = p.cfg.planner.budget;
    let series = study
        .series
        .iter()
        .map(|s| SeriesSummary {
            label: s.label.clone(),
            trace_initial: s.trace.mean[0],
            trace_mid: study.value_at(&s.label, Metric::Trace, b / 2.0).unwrap_or(f64::NAN),
            trace_final: *s.trace.mean.last().unwrap_or(&f64::NAN),
            rmse_mid: study.value_at(&s.label, Metric::Rmse, b / 2.0).unwrap_or(f64::NAN),
            rmse_final: *s.rmse.mean.last().unwrap_or(&f64::NAN),
        })
        .collect();
    let logs: Vec<MissionLog> = study.series.iter().flat_map(|s| s.logs.iter().cloned()).collect();
    let (violations, late) = safety_counts(p, &logs);
    StudySummary {
        study: study_name.into(),
        name: p.cfg.name.clone(),
        trials,
        budget: b,
        band: "normal approximation: mean ± 1.96·sd/√k over trials".into(),
        pairing: "trial k of every series uses the same ground-truth field, derived from (seed, k)".into(),
        series,
        clearance_violations: violations,
        measurements_after_budget: late,
        wall_seconds: started.elapsed().as_secs_f64(),
        out_dir: out.to_path_buf(),
    }
}

fn write_study(prefix: &str, study: &Study, out: &Path) -> Result<()> {
    for metric in [Metric::Trace, Metric::Rmse] {
        let cols: Vec<(&str, &super::report::Band)> = study
            .series
            .iter()
            .map(|s| {
                (
                    s.label.as_str(),
                    match metric {
                        Metric::Trace => &s.trace,
                        Metric::Rmse => &s.rmse,
                    },
                )
            })
            .collect();
        write(&out.join(format!("{prefix}_{}.csv", metric.name())), &bands_csv(&study.grid, &cols))?;
    }
    for s in &study.series {
        for (k, log) in s.logs.iter().enumerate() {
            write(&out.join("trials").join(format!("{prefix}_{}_{k:03}.csv", s.label)), &log.metrics_csv())?;
        }
    }
    Ok(())
}

fn run_study(
    prefix: &str,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
    f: fn(&Prepared, usize, Exec) -> Result<Study>,
) -> Result<StudySummary> {
    let started = Instant::now();
    let cfg = with_overrides(cfg, opts)?;
    let out = output_dir(&cfg, opts);
    let (p, study) = opts.within(|| -> Result<_> {
        let p = prepare(&cfg)?;
        let study = f(&p, cfg.trials, opts.exec())?;
        Ok((p, study))
    })?;
    write_study(prefix, &study, &out)?;
    let summary = summarize(prefix, &p, &study, cfg.trials, started, &out);
    write(&out.join(format!("{prefix}_summary.json")), &to_json(&summary)?)?;
    for s in &summary.series {
        log::info!(
            "{prefix} `{}` {}: trace mid {:.3} final {:.3}, rmse final {:.4}",
            cfg.name,
            s.label,
            s.trace_mid,
            s.trace_final,
            s.rmse_final
        );
    }
    Ok(summary)
}

pub fn cmd_compare(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<StudySummary> {
    run_study("compare", cfg, opts, compare)
}

pub fn cmd_ablate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<StudySummary> {
    run_study("ablate", cfg, opts, ablate)
}

/// One SVG per `*_trace.csv` / `*_rmse.csv` table in `dir`.
pub fn cmd_plot(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| IppError::MissingInput(format!("{}: {e}", dir.display())))?;
    let mut tables: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_trace.csv") || n.ends_with("_rmse.csv"))
        })
        .collect();
    tables.sort();
    if tables.is_empty() {
        return Err(IppError::MissingInput(format!("no *_trace.csv or *_rmse.csv tables in {}", dir.display())));
    }
    let mut written = Vec::new();
    for path in tables {
        let text = std::fs::read_to_string(&path).map_err(|e| IppError::io(&path, e))?;
        let (grid, series) = parse_bands_csv(&text)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("chart").to_string();
        let y_label = if stem.ends_with("_trace") { "Tr(P)" } else { "RMSE" };
        let svg = svg_chart(&stem.replace('_', " "), "time [s]", y_label, &grid, &series);
        let target = path.with_extension("svg");
        write(&target, &svg)?;
        written.push(target);
    }
    Ok(written)
}
