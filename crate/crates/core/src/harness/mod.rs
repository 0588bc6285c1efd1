//! Experiment orchestration: scenario preparation, paired multi-trial
//! comparisons, prior ablations and report files.

pub mod config;
pub mod plot;
pub mod report;

mod commands;

pub use commands::{cmd_ablate, cmd_compare, cmd_plot, cmd_run, output_dir, RunOptions, RunSummary, SeriesSummary, StudySummary, safety_counts};
pub use config::{KernelConfig, MeshSource, ScenarioConfig, WorldParams};

use serde::{Deserialize, Serialize};

use crate::baselines::{alt_covariance, AltCovariance};
use crate::error::{IppError, Result};
use crate::field_map::{init_map, trace_cov, FieldMap};
use crate::ground_truth::{generate_field, GroundTruthField};
use crate::mesh::{composite_airplane, compute_geodesics, generate_cylinder_tank, load_mesh, load_or_compute_geodesics, SurfaceMesh, Vec3};
use crate::par::Exec;
use crate::planner::{build_library, run_mission, MissionLog, MissionSetup, PlannerKind, Scene, ViewpointLibrary};
use crate::seed;
use crate::sensor::Viewpoint;
use crate::world::WorldModel;
use report::{band, resample, time_grid, Band, Metric};

const TRUTH_STREAM: u64 = 0x7472757468;
const PRIOR_STREAM: u64 = 0x7072696f72;

/// Prior covariance used by the informative planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Mgp,
    Identity,
    RandomSpd,
}

impl PriorKind {
    pub const ALL: [PriorKind; 3] = [PriorKind::Mgp, PriorKind::Identity, PriorKind::RandomSpd];

    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Mgp => "mgp",
            PriorKind::Identity => "identity",
            PriorKind::RandomSpd => "random_spd",
        }
    }
}

pub fn load_mesh_source(cfg: &ScenarioConfig) -> Result<SurfaceMesh> {
    match &cfg.mesh {
        MeshSource::Cylinder {
            radius,
            height,
            dome_height,
            target_facets,
        } => generate_cylinder_tank(*radius, *height, *dome_height, *target_facets),
        MeshSource::Airplane => Ok(composite_airplane()),
        MeshSource::File { path } => load_mesh(&cfg.resolve(path)),
    }
}

/// A scenario with its geometry, library and prior built once and shared by
/// every trial.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub scene: Scene,
    pub library: ViewpointLibrary,
    pub prior: FieldMap,
    pub start: Viewpoint,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mesh = load_mesh_source(cfg)?;
    let geo = match &cfg.geodesic_cache {
        Some(dir) => load_or_compute_geodesics(&mesh, &cfg.resolve(dir))?,
        None => compute_geodesics(&mesh)?,
    };
    let world = WorldModel::build(&mesh, cfg.world.voxel, cfg.margin())?;
    let prior = init_map(&geo, &cfg.kernel.params(), cfg.prior_mean, &mesh.content_hash())?;
    let mut scene = Scene::new(mesh, geo, world, cfg.camera, cfg.dynamics);
    if let Some(step) = cfg.world.step {
        scene.step = step;
    }
    scene.yaw_bins = cfg.yaw_bins;
    let library = build_library(&scene, &cfg.library)?;
    let start = match cfg.start {
        Some([x, y, z]) => {
            let p = Vec3::new(x, y, z);
            if scene.world.distance_at(&p) < scene.lim.radius {
                return Err(IppError::param("start", "start position is closer to the surface than the vehicle radius"));
            }
            scene.oriented(p)
        }
        None => *library.get(0),
    };
    log::info!(
        "prepared `{}`: {} facets, {} library viewpoints, prior trace {:.3}",
        cfg.name,
        scene.mesh.len(),
        library.len(),
        trace_cov(&prior)
    );
    Ok(Prepared {
        cfg: cfg.clone(),
        scene,
        library,
        prior,
        start,
    })
}

impl Prepared {
    /// Ground truth for a trial; shared by every method in that trial.
    pub fn truth(&self, trial: usize) -> Result<GroundTruthField> {
        generate_field(&self.scene.geo, &self.cfg.truth, seed::derive(self.cfg.seed, &[TRUTH_STREAM, trial as u64]))
    }

    /// Prior map; alternative covariances are scaled to the mGP trace.
    pub fn prior(&self, kind: PriorKind, trial: usize) -> Result<FieldMap> {
        let n = self.prior.len();
        let target = trace_cov(&self.prior);
        let cov = match kind {
            PriorKind::Mgp => return Ok(self.prior.clone()),
            PriorKind::Identity => alt_covariance(AltCovariance::Identity, n, target, 0)?,
            PriorKind::RandomSpd => alt_covariance(
                AltCovariance::RandomSpd,
                n,
                target,
                seed::derive(self.cfg.seed, &[PRIOR_STREAM, trial as u64]),
            )?,
        };
        self.prior.with_cov(cov)
    }

    pub fn mission_seed(&self, kind: PlannerKind, trial: usize) -> u64 {
        seed::derive(self.cfg.seed, &[kind.id(), trial as u64])
    }

    pub fn run_trial(&self, kind: PlannerKind, prior: PriorKind, trial: usize, exec: Exec) -> Result<MissionLog> {
        let truth = self.truth(trial)?;
        let setup = MissionSetup {
            scene: &self.scene,
            library: &self.library,
            truth: &truth,
            cfg: &self.cfg.planner,
            start: self.start,
            exec,
        };
        run_mission(&setup, self.prior(prior, trial)?, kind, self.mission_seed(kind, trial))
    }

    /// All trials of one method, in trial order. Trials run through `exec`;
    /// each trial plans sequentially inside.
    pub fn run_trials(&self, kind: PlannerKind, prior: PriorKind, trials: usize, exec: Exec) -> Result<Vec<MissionLog>> {
        let inner = match exec {
            Exec::Parallel if trials > 1 => Exec::Sequential,
            other => other,
        };
        exec.map_range(trials, |t| self.run_trial(kind, prior, t, inner))
            .into_iter()
            .collect()
    }
}

/// Mean curves and bands of one labelled set of trials.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub logs: Vec<MissionLog>,
    pub trace: Band,
    pub rmse: Band,
}

impl Series {
    pub fn new(label: &str, logs: Vec<MissionLog>, grid: &[f64]) -> Self {
        let curves = |m: Metric| -> Vec<Vec<f64>> { logs.iter().map(|l| resample(&l.events, grid, m)).collect() };
        let trace = band(&curves(Metric::Trace));
        let rmse = band(&curves(Metric::Rmse));
        Self {
            label: label.to_string(),
            logs,
            trace,
            rmse,
        }
    }
}

/// Several series on a common time grid `[0, B]`.
#[derive(Debug, Clone)]
pub struct Study {
    pub grid: Vec<f64>,
    pub series: Vec<Series>,
}

impl Study {
    pub fn get(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    /// Band value of `label` at grid time closest to `t`.
    pub fn value_at(&self, label: &str, metric: Metric, t: f64) -> Option<f64> {
        let s = self.get(label)?;
        let k = self
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(match metric {
            Metric::Trace => s.trace.mean[k],
            Metric::Rmse => s.rmse.mean[k],
        })
    }
}

/// IPP, coverage and random on paired ground truths.
pub fn compare(p: &Prepared, trials: usize, exec: Exec) -> Result<Study> {
    let grid = time_grid(p.cfg.planner.budget, 1.0);
    let mut series = Vec::new();
    for kind in PlannerKind::ALL {
        let logs = p.run_trials(kind, PriorKind::Mgp, trials, exec)?;
        series.push(Series::new(kind.name(), logs, &grid));
    }
    Ok(Study { grid, series })
}

/// IPP with each prior covariance, same seeds and ground truths.
pub fn ablate(p: &Prepared, trials: usize, exec: Exec) -> Result<Study> {
    let grid = time_grid(p.cfg.planner.budget, 1.0);
    let mut series = Vec::new();
    for prior in PriorKind::ALL {
        let logs = p.run_trials(PlannerKind::Ipp, prior, trials, exec)?;
        series.push(Series::new(prior.name(), logs, &grid));
    }
    Ok(Study { grid, series })
}
