//! Receding-horizon informative path planning: viewpoint library, greedy
//! waypoint search, CMA-ES refinement and the mission loop.

mod cmaes;
mod gain;
mod greedy;
mod library;
mod mission;

pub use cmaes::{maximize, CmaOutcome, CmaSettings};
pub use gain::{info_gain, GainEvaluator};
pub use greedy::greedy_search;
pub use library::{build_library, LibraryKind, LibraryParams, ViewpointLibrary};
pub use mission::{
    refine_cmaes, run_mission, ExecutedSegment, HorizonContext, HorizonRecord, MissionEvent, MissionLog, MissionSetup,
    PlannerKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::mesh::{GeodesicField, SurfaceMesh, Vec3};
use crate::sensor::{best_yaw, predicted_observations, CameraModel, Viewpoint};
use crate::trajectory::{DynamicsLimits, Trajectory};
use crate::world::{default_step, WorldModel};

/// Everything that stays fixed for a mission: geometry, sensor and vehicle.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: SurfaceMesh,
    pub geo: GeodesicField,
    pub world: WorldModel,
    pub cam: CameraModel,
    pub lim: DynamicsLimits,
    /// Sample spacing for line-of-sight and collision checks, meters.
    pub step: f64,
    pub yaw_bins: usize,
}

impl Scene {
    pub fn new(mesh: SurfaceMesh, geo: GeodesicField, world: WorldModel, cam: CameraModel, lim: DynamicsLimits) -> Self {
        let step = default_step(world.voxel(), lim.radius);
        Self {
            mesh,
            geo,
            world,
            cam,
            lim,
            step,
            yaw_bins: 16,
        }
    }

    pub fn observations(&self, vp: &Viewpoint) -> Vec<(usize, f64)> {
        predicted_observations(vp, &self.cam, &self.mesh, &self.world)
    }

    /// Viewpoint at `position` with the best library yaw.
    pub fn oriented(&self, position: Vec3) -> Viewpoint {
        Viewpoint::new(position, best_yaw(&position, &self.cam, &self.mesh, &self.world, self.yaw_bins).0)
    }

    /// Line of sight with the vehicle radius as clearance.
    pub fn line_of_sight(&self, a: &Vec3, b: &Vec3) -> bool {
        self.world.line_of_sight(a, b, self.lim.radius, self.step)
    }

    pub fn violations(&self, traj: &Trajectory) -> usize {
        self.world.count_violations(traj, self.lim.radius, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaConfig {
    pub enabled: bool,
    /// Population size; `4 + ⌊3 ln dim⌋` when unset.
    pub population: Option<usize>,
    pub max_iter: usize,
    /// Initial step size, meters; a quarter of the library spacing when unset.
    pub sigma0: Option<f64>,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            population: None,
            max_iter: 50,
            sigma0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Waypoints searched per horizon after the current pose.
    pub n_waypoints: usize,
    pub poly_order: usize,
    pub safety: f64,
    pub w_coll: f64,
    /// Flight-time budget, s.
    pub budget: f64,
    /// Measurement frequency, Hz.
    pub meas_freq: f64,
    pub cma: CmaConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_waypoints: 4,
            poly_order: 12,
            safety: 1.1,
            w_coll: 10.0,
            budget: 120.0,
            meas_freq: 0.2,
            cma: CmaConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_waypoints < 2 {
            return Err(IppError::param("n_waypoints", "must be ≥ 2"));
        }
        if self.poly_order < 5 {
            return Err(IppError::param("poly_order", format!("must be ≥ 5, got {}", self.poly_order)));
        }
        if !(self.safety >= 1.0) {
            return Err(IppError::param("safety", format!("must be ≥ 1, got {}", self.safety)));
        }
        if !(self.w_coll >= 0.0) {
            return Err(IppError::param("w_coll", format!("must be ≥ 0, got {}", self.w_coll)));
        }
        if !(self.budget > 0.0) {
            return Err(IppError::param("budget", format!("must be positive, got {}", self.budget)));
        }
        if !(self.meas_freq > 0.0) {
            return Err(IppError::param("meas_freq", format!("must be positive, got {}", self.meas_freq)));
        }
        if self.cma.population.is_some_and(|p| p < 4) {
            return Err(IppError::param("cma.population", "must be ≥ 4"));
        }
        if self.cma.sigma0.is_some_and(|s| !(s > 0.0)) {
            return Err(IppError::param("cma.sigma0", "must be positive"));
        }
        Ok(())
    }
}
