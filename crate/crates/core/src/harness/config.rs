//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::field_map::KernelParams;
use crate::ground_truth::FieldSpec;
use crate::planner::{LibraryParams, PlannerConfig};
use crate::sensor::CameraModel;
use crate::trajectory::DynamicsLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    Cylinder {
        radius: f64,
        height: f64,
        dome_height: f64,
        target_facets: usize,
    },
    Airplane,
    /// OBJ or STL file; relative paths resolve against the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub sigma_f: f64,
    pub length_scale: f64,
    /// `1e-6 · σ_f²` when unset.
    #[serde(default)]
    pub jitter: Option<f64>,
}

impl KernelConfig {
    pub fn params(&self) -> KernelParams {
        let mut p = KernelParams::new(self.sigma_f, self.length_scale);
        if let Some(j) = self.jitter {
            p.jitter = j;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub voxel: f64,
    /// Grid padding around the mesh; `d_max + 2` when unset.
    pub margin: Option<f64>,
    /// Collision and line-of-sight sample spacing; `min(voxel, r) / 2` when unset.
    pub step: Option<f64>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            voxel: 0.5,
            margin: None,
            step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Directory for cached geodesic tables.
    #[serde(default)]
    pub geodesic_cache: Option<PathBuf>,
    /// Start position; the first library viewpoint when unset.
    #[serde(default)]
    pub start: Option<[f64; 3]>,
    #[serde(default = "default_yaw_bins")]
    pub yaw_bins: usize,
    #[serde(default)]
    pub prior_mean: f64,
    pub mesh: MeshSource,
    pub kernel: KernelConfig,
    #[serde(default = "CameraModel::standard")]
    pub camera: CameraModel,
    #[serde(default = "DynamicsLimits::standard")]
    pub dynamics: DynamicsLimits,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub library: LibraryParams,
    #[serde(default)]
    pub world: WorldParams,
    #[serde(default)]
    pub truth: FieldSpec,
    /// Directory the config was loaded from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> usize {
    1
}

fn default_yaw_bins() -> usize {
    16
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IppError::Config(e.to_string()))
    }

    /// Read, parse and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(IppError::param("trials", "must be ≥ 1"));
        }
        if self.yaw_bins < 4 {
            return Err(IppError::param("yaw_bins", format!("must be ≥ 4, got {}", self.yaw_bins)));
        }
        self.kernel.params().validate()?;
        self.camera.validate()?;
        self.dynamics.validate()?;
        self.planner.validate()?;
        if !(self.world.voxel > 0.0) {
            return Err(IppError::param("world.voxel", format!("must be positive, got {}", self.world.voxel)));
        }
        if let Some(m) = self.world.margin {
            if !(m >= self.camera.d_max) {
                return Err(IppError::param("world.margin", format!("must be ≥ d_max = {}, got {m}", self.camera.d_max)));
            }
        }
        if self.world.step.is_some_and(|s| !(s > 0.0)) {
            return Err(IppError::param("world.step", "must be positive"));
        }
        if let MeshSource::Cylinder {
            radius,
            height,
            dome_height,
            target_facets,
        } = self.mesh
        {
            if !(radius > 0.0 && height > 0.0 && dome_height > 0.0) || target_facets < 8 {
                return Err(IppError::param("mesh", "cylinder needs positive sizes and target_facets ≥ 8"));
            }
        }
        for s in &self.truth.sources {
            if !(s.width > 0.0) {
                return Err(IppError::param("truth.sources.width", format!("must be positive, got {}", s.width)));
            }
        }
        if let Some(r) = &self.truth.random {
            if !(r.width[0] > 0.0 && r.width[0] <= r.width[1]) || r.amplitude[0] > r.amplitude[1] {
                return Err(IppError::param("truth.random", "ranges must be ordered with positive widths"));
            }
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        self.world.margin.unwrap_or(self.camera.d_max + 2.0)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
