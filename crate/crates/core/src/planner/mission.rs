//! Closed-loop mission: plan a horizon, fly it, fuse measurements, repeat
//! until the flight-time budget is spent.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{greedy_search, maximize, CmaSettings, GainEvaluator, PlannerConfig, Scene, ViewpointLibrary};
use crate::baselines::{plan_coverage, plan_random, route_between, LosGraph};
use crate::error::Result;
use crate::field_map::{fuse, trace_cov, FieldMap};
use crate::fmt::sig9;
use crate::ground_truth::{rmse, GroundTruthField};
use crate::mesh::Vec3;
use crate::par::Exec;
use crate::seed;
use crate::sensor::{simulate_measurement, Viewpoint};
use crate::trajectory::{measurement_viewpoints, plan_polynomial, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Ipp,
    Coverage,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Ipp, PlannerKind::Coverage, PlannerKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Ipp => "ipp",
            PlannerKind::Coverage => "coverage",
            PlannerKind::Random => "random",
        }
    }

    pub fn id(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionEvent {
    pub t: f64,
    pub trace: f64,
    pub rmse: f64,
    /// Camera pose of the measurement; `None` for the initial state.
    pub viewpoint: Option<Viewpoint>,
    pub n_obs: usize,
}

/// A trajectory flown from global time `t_start` for `duration` seconds
/// (shorter than the trajectory when cut by the budget).
#[derive(Debug, Clone)]
pub struct ExecutedSegment {
    pub t_start: f64,
    pub duration: f64,
    pub traj: Trajectory,
}

#[derive(Debug, Clone)]
pub struct HorizonRecord {
    pub t_start: f64,
    pub waypoints: Vec<Viewpoint>,
    /// Objective of the chosen plan (informative planner only).
    pub objective: Option<f64>,
    pub plan_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MissionLog {
    pub kind: PlannerKind,
    pub events: Vec<MissionEvent>,
    pub executed: Vec<ExecutedSegment>,
    pub horizons: Vec<HorizonRecord>,
    pub final_map: FieldMap,
}

impl MissionLog {
    /// `t,trace,rmse` per logged state.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("t,trace,rmse\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{},{}", sig9(e.t), sig9(e.trace), sig9(e.rmse));
        }
        out
    }

    /// Executed path as `t,x,y,z,yaw` sampled at `rate` Hz.
    pub fn trajectory_csv(&self, rate: f64) -> String {
        let mut out = String::from("t,x,y,z,yaw\n");
        for seg in &self.executed {
            seg.traj.append_csv(&mut out, seg.t_start, rate, seg.duration);
        }
        out
    }

    /// Positions along everything that was flown, spaced ≤ `step`.
    pub fn executed_positions(&self, step: f64) -> Vec<Vec3> {
        self.executed
            .iter()
            .flat_map(|s| s.traj.sample_positions_until(step, s.duration))
            .collect()
    }

    pub fn flight_time(&self) -> f64 {
        self.executed.last().map_or(0.0, |s| s.t_start + s.duration)
    }

    pub fn final_event(&self) -> &MissionEvent {
        self.events.last().expect("initial state is always logged")
    }
}

/// Fixed inputs of one mission.
#[derive(Debug, Clone, Copy)]
pub struct MissionSetup<'a> {
    pub scene: &'a Scene,
    pub library: &'a ViewpointLibrary,
    pub truth: &'a GroundTruthField,
    pub cfg: &'a PlannerConfig,
    pub start: Viewpoint,
    pub exec: Exec,
}

/// Timing of the horizon being planned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonContext {
    /// Mission time at the start of the horizon, s.
    pub t_now: f64,
    /// Mission time of the next measurement, s.
    pub next_meas: f64,
    pub seed: u64,
}

/// Time-averaged predicted gain plus collision penalty of a waypoint list.
struct Objective<'a> {
    scene: &'a Scene,
    cfg: &'a PlannerConfig,
    ev: GainEvaluator<'a>,
    offset: f64,
    remaining: f64,
}

impl Objective<'_> {
    fn value(&self, c: &[Viewpoint]) -> f64 {
        let Ok(traj) = plan_polynomial(c, &self.scene.lim, self.cfg.poly_order, self.cfg.safety) else {
            return f64::NEG_INFINITY;
        };
        let total = traj.total_time();
        if total == 0.0 {
            return 0.0;
        }
        let obs: Vec<(usize, f64)> = measurement_viewpoints(&traj, self.cfg.meas_freq, self.offset)
            .into_iter()
            .filter(|(t, _)| *t <= self.remaining + 1e-9)
            .flat_map(|(_, vp)| self.scene.observations(&vp))
            .collect();
        let info = self.ev.gain(&obs) / total;
        info - self.cfg.w_coll * self.scene.violations(&traj) as f64
    }
}

/// Refine the positions of every waypoint after the first with CMA-ES.
/// Yaw at each candidate position is the best library yaw. Returns the
/// best waypoints found and their objective; never worse than `c0`.
pub fn refine_cmaes(
    c0: &[Viewpoint],
    cov: &DMatrix<f64>,
    scene: &Scene,
    cfg: &PlannerConfig,
    spacing: f64,
    ctx: &HorizonContext,
    exec: Exec,
) -> (Vec<Viewpoint>, f64) {
    let obj = Objective {
        scene,
        cfg,
        ev: GainEvaluator::new(cov),
        offset: (ctx.next_meas - ctx.t_now).max(0.0),
        remaining: cfg.budget - ctx.t_now,
    };
    let u0 = obj.value(c0);
    if c0.len() < 2 || !cfg.cma.enabled {
        return (c0.to_vec(), u0);
    }
    let x0: Vec<f64> = c0[1..].iter().flat_map(|v| v.position.iter().copied().collect::<Vec<_>>()).collect();
    let (lo, hi) = scene.world.bounds();
    let reps = c0.len() - 1;
    let settings = CmaSettings {
        lambda: cfg.cma.population,
        max_iter: cfg.cma.max_iter,
        sigma0: cfg.cma.sigma0.unwrap_or(0.25 * spacing),
        lower: Some((0..reps).flat_map(|_| [lo.x, lo.y, lo.z]).collect()),
        upper: Some((0..reps).flat_map(|_| [hi.x, hi.y, hi.z]).collect()),
        seed: ctx.seed,
    };
    let decode = |x: &[f64]| -> Vec<Viewpoint> {
        std::iter::once(c0[0])
            .chain(x.chunks(3).map(|p| scene.oriented(Vec3::new(p[0], p[1], p[2]))))
            .collect()
    };
    let out = maximize(|x| obj.value(&decode(x)), &x0, Some(u0), &settings, exec);
    if out.value > u0 {
        (decode(&out.x), out.value)
    } else {
        (c0.to_vec(), u0)
    }
}

fn fit(c: &[Viewpoint], scene: &Scene, cfg: &PlannerConfig) -> Option<Trajectory> {
    let traj = plan_polynomial(c, &scene.lim, cfg.poly_order, cfg.safety).ok()?;
    (scene.violations(&traj) == 0).then_some(traj)
}

/// First collision-free option among: the plan, the fallback, and the
/// plan's prefixes from longest to shortest.
fn safe_trajectory(c: &[Viewpoint], fallback: Option<&[Viewpoint]>, scene: &Scene, cfg: &PlannerConfig) -> Option<Trajectory> {
    if let Some(t) = fit(c, scene, cfg) {
        return Some(t);
    }
    log::warn!("planned trajectory violates clearance; trying fallbacks");
    if let Some(t) = fallback.and_then(|f| fit(f, scene, cfg)) {
        return Some(t);
    }
    (2..c.len()).rev().find_map(|k| fit(&c[..k], scene, cfg))
}

/// Open-loop coverage route with a cursor; reverses at the end.
struct CoverageCursor {
    route: Vec<usize>,
    next: usize,
}

impl CoverageCursor {
    fn chunk(&mut self, n: usize, current: &Viewpoint, lib: &ViewpointLibrary) -> Vec<Viewpoint> {
        if self.next >= self.route.len() {
            if self.route.len() < 2 {
                return vec![*current];
            }
            self.route.reverse();
            self.next = 1;
        }
        let end = (self.next + n).min(self.route.len());
        let mut c = vec![*current];
        for &i in &self.route[self.next..end] {
            let vp = *lib.get(i);
            if vp != *c.last().expect("nonempty") {
                c.push(vp);
            }
        }
        self.next = end;
        c
    }
}

pub fn run_mission(setup: &MissionSetup, prior: FieldMap, kind: PlannerKind, mission_seed: u64) -> Result<MissionLog> {
    let MissionSetup {
        scene,
        library: lib,
        truth,
        cfg,
        start,
        exec,
    } = *setup;
    cfg.validate()?;
    let budget = cfg.budget;
    let mut map = prior;
    let mut events = vec![MissionEvent {
        t: 0.0,
        trace: trace_cov(&map),
        rmse: rmse(&map, truth)?,
        viewpoint: None,
        n_obs: 0,
    }];
    let mut executed = Vec::new();
    let mut horizons = Vec::new();
    let mut t = 0.0;
    let mut k_next: u64 = 1;
    let mut current = start;

    let mut coverage = (kind == PlannerKind::Coverage).then(|| {
        let graph = LosGraph::build(lib, scene, exec);
        let plan = plan_coverage(lib, scene, &graph);
        let mut route = Vec::new();
        if let Some(&first) = plan.route.first() {
            route = route_between(&graph, lib, scene, &start.position, first).unwrap_or_default();
            route.pop();
            route.extend(&plan.route);
        }
        CoverageCursor { route, next: 0 }
    });

    let mut horizon: u64 = 0;
    while t < budget {
        let clock = Instant::now();
        let meas_time = |k: u64| k as f64 / cfg.meas_freq;
        let ctx = HorizonContext {
            t_now: t,
            next_meas: meas_time(k_next),
            seed: seed::derive(mission_seed, &[0x706c616e, horizon]),
        };
        let (plan, fallback, objective) = match kind {
            PlannerKind::Ipp => {
                let c0 = greedy_search(map.cov(), current, lib, cfg.n_waypoints, scene, exec);
                let (c, u) = refine_cmaes(&c0, map.cov(), scene, cfg, lib.spacing(), &ctx, exec);
                (c, Some(c0), Some(u))
            }
            PlannerKind::Coverage => {
                let cur = coverage.as_mut().expect("coverage state");
                (cur.chunk(cfg.n_waypoints, &current, lib), None, None)
            }
            PlannerKind::Random => (plan_random(lib, &current, cfg.n_waypoints, scene, ctx.seed), None, None),
        };
        if plan.len() < 2 {
            log::info!("{}: nothing left to plan at t = {t:.1} s", kind.name());
            break;
        }
        let Some(traj) = safe_trajectory(&plan, fallback.as_deref(), scene, cfg) else {
            log::warn!("{}: no collision-free plan at t = {t:.1} s; ending mission", kind.name());
            break;
        };
        let total = traj.total_time();
        if total == 0.0 {
            break;
        }
        let plan_seconds = clock.elapsed().as_secs_f64();
        log::debug!(
            "{} horizon {horizon}: t = {t:.1} s, {} waypoints, {:.1} s flight, objective {:?}, planned in {:.2} s",
            kind.name(),
            traj.waypoints().len(),
            total,
            objective,
            plan_seconds
        );
        horizons.push(HorizonRecord {
            t_start: t,
            waypoints: traj.waypoints().to_vec(),
            objective,
            plan_seconds,
        });

        let t_end = (t + total).min(budget);
        while meas_time(k_next) <= t_end + 1e-9 {
            let tm = meas_time(k_next).min(budget);
            let vp = traj.viewpoint(tm - t);
            let obs_seed = seed::derive(mission_seed, &[0x6d656173, k_next]);
            if let Some(obs) = simulate_measurement(&vp, truth, &scene.cam, &scene.mesh, &scene.world, obs_seed) {
                map = fuse(&map, &obs)?;
                events.push(MissionEvent {
                    t: tm,
                    trace: trace_cov(&map),
                    rmse: rmse(&map, truth)?,
                    viewpoint: Some(vp),
                    n_obs: obs.len(),
                });
            }
            k_next += 1;
        }
        current = traj.viewpoint(total);
        executed.push(ExecutedSegment {
            t_start: t,
            duration: t_end - t,
            traj,
        });
        t = t_end;
        horizon += 1;
    }
    Ok(MissionLog {
        kind,
        events,
        executed,
        horizons,
        final_map: map,
    })
}
