//! Candidate viewpoints on an offset shell around the mesh.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{IppError, Result};
use crate::mesh::Vec3;
use crate::par::Exec;
use crate::sensor::{best_yaw, Viewpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryKind {
    /// Rings when the horizontal footprint is round, shell otherwise.
    Auto,
    /// Rings × levels lattice around the vertical axis of the bounding box.
    Rings,
    /// Grid points whose surface distance lies within a band around `d_view`.
    Shell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryParams {
    pub kind: LibraryKind,
    /// Offset from the surface, meters.
    pub d_view: f64,
    pub rings: usize,
    pub levels: usize,
    /// Lowest and highest level heights; defaults to
    /// `[z_min + 0.1 H, z_max + 0.05 H]`.
    pub z_range: Option<[f64; 2]>,
    /// Lattice spacing for the shell, meters; defaults to `0.75 · d_view`.
    pub shell_spacing: Option<f64>,
}

impl Default for LibraryParams {
    fn default() -> Self {
        Self {
            kind: LibraryKind::Auto,
            d_view: 4.0,
            rings: 12,
            levels: 5,
            z_range: None,
            shell_spacing: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ViewpointLibrary {
    viewpoints: Vec<Viewpoint>,
    observations: Vec<Vec<(usize, f64)>>,
    levels: Vec<usize>,
    angles: Vec<f64>,
    spacing: f64,
}

impl ViewpointLibrary {
    /// Library from explicit viewpoints; level and angle are derived from
    /// height order and the bearing around the mesh's vertical axis.
    pub fn from_viewpoints(viewpoints: Vec<Viewpoint>, scene: &Scene) -> Result<Self> {
        let levels = quantize_levels(&viewpoints);
        Self::assemble(viewpoints, levels, scene)
    }

    fn assemble(viewpoints: Vec<Viewpoint>, levels: Vec<usize>, scene: &Scene) -> Result<Self> {
        if viewpoints.is_empty() {
            return Err(IppError::EmptyLibrary);
        }
        let axis = axis_center(scene);
        let angles = viewpoints
            .iter()
            .map(|v| (v.position.y - axis.y).atan2(v.position.x - axis.x))
            .collect();
        let observations = Exec::default().map(&viewpoints, |vp| scene.observations(vp));
        let spacing = median_nn_spacing(&viewpoints);
        Ok(Self {
            viewpoints,
            observations,
            levels,
            angles,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn get(&self, i: usize) -> &Viewpoint {
        &self.viewpoints[i]
    }

    /// Predicted `(facet, noise variance)` observations from viewpoint `i`.
    pub fn observations(&self, i: usize) -> &[(usize, f64)] {
        &self.observations[i]
    }

    pub fn level(&self, i: usize) -> usize {
        self.levels[i]
    }

    /// Bearing around the mesh's vertical axis, radians.
    pub fn angle(&self, i: usize) -> f64 {
        self.angles[i]
    }

    /// Median nearest-neighbour distance between library positions.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Keep only viewpoints whose index satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        if idx.is_empty() {
            return Err(IppError::EmptyLibrary);
        }
        let viewpoints: Vec<Viewpoint> = idx.iter().map(|&i| self.viewpoints[i]).collect();
        let spacing = median_nn_spacing(&viewpoints);
        Ok(Self {
            viewpoints,
            observations: idx.iter().map(|&i| self.observations[i].clone()).collect(),
            levels: idx.iter().map(|&i| self.levels[i]).collect(),
            angles: idx.iter().map(|&i| self.angles[i]).collect(),
            spacing,
        })
    }
}

fn axis_center(scene: &Scene) -> Vec3 {
    let (lo, hi) = scene.mesh.bounds();
    (lo + hi) * 0.5
}

fn median_nn_spacing(vps: &[Viewpoint]) -> f64 {
    if vps.len() < 2 {
        return 1.0;
    }
    let mut nn: Vec<f64> = vps
        .iter()
        .enumerate()
        .map(|(i, a)| {
            vps.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (a.position - b.position).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    nn[nn.len() / 2]
}

/// Rank distinct heights (to 1 mm) so equal-height viewpoints share a level.
fn quantize_levels(vps: &[Viewpoint]) -> Vec<usize> {
    let keys: Vec<i64> = vps.iter().map(|v| (v.position.z * 1000.0).round() as i64).collect();
    let mut distinct = keys.clone();
    distinct.sort_unstable();
    distinct.dedup();
    keys.iter().map(|k| distinct.binary_search(k).expect("present")).collect()
}

fn is_round(scene: &Scene) -> bool {
    let (lo, hi) = scene.mesh.bounds();
    let (ex, ey) = (hi.x - lo.x, hi.y - lo.y);
    let c = axis_center(scene);
    let r_max = scene
        .mesh
        .vertices()
        .iter()
        .map(|v| ((v.x - c.x).powi(2) + (v.y - c.y).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let wide = ex.max(ey);
    (ex - ey).abs() <= 0.1 * wide && r_max <= 0.55 * wide
}

fn ring_positions(scene: &Scene, p: &LibraryParams) -> Vec<(Vec3, usize)> {
    let (lo, hi) = scene.mesh.bounds();
    let c = axis_center(scene);
    let r_max = scene
        .mesh
        .vertices()
        .iter()
        .map(|v| ((v.x - c.x).powi(2) + (v.y - c.y).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let h = hi.z - lo.z;
    let [z0, z1] = p.z_range.unwrap_or([lo.z + 0.1 * h, hi.z + 0.05 * h]);
    let radius = r_max + p.d_view;
    let mut out = Vec::with_capacity(p.rings * p.levels);
    for level in 0..p.levels {
        let z = if p.levels == 1 {
            0.5 * (z0 + z1)
        } else {
            z0 + (z1 - z0) * level as f64 / (p.levels - 1) as f64
        };
        for i in 0..p.rings {
            let a = 2.0 * PI * i as f64 / p.rings as f64;
            out.push((Vec3::new(c.x + radius * a.cos(), c.y + radius * a.sin(), z), level));
        }
    }
    out
}

fn shell_positions(scene: &Scene, p: &LibraryParams) -> Vec<(Vec3, usize)> {
    let s = p.shell_spacing.unwrap_or(0.75 * p.d_view);
    let tol = 0.5 * s;
    let (lo, hi) = scene.mesh.bounds();
    let pad = p.d_view + tol;
    let start = lo - Vec3::repeat(pad);
    let counts = (hi - lo + Vec3::repeat(2.0 * pad)).map(|e| (e / s).floor() as usize + 1);
    let mut out = Vec::new();
    for k in 0..counts.z {
        for j in 0..counts.y {
            for i in 0..counts.x {
                let q = start + Vec3::new(i as f64, j as f64, k as f64) * s;
                let d = scene.world.distance_at(&q);
                if d.is_finite() && (d - p.d_view).abs() <= tol {
                    out.push((q, k));
                }
            }
        }
    }
    out
}

/// Candidate viewpoints with their best yaw. Positions closer than the
/// vehicle radius to the surface, or seeing nothing, are dropped.
pub fn build_library(scene: &Scene, params: &LibraryParams) -> Result<ViewpointLibrary> {
    if !(params.d_view > 0.0) {
        return Err(IppError::param("d_view", format!("must be positive, got {}", params.d_view)));
    }
    if params.rings == 0 || params.levels == 0 {
        return Err(IppError::param("rings", "rings and levels must be ≥ 1"));
    }
    let rings = match params.kind {
        LibraryKind::Rings => true,
        LibraryKind::Shell => false,
        LibraryKind::Auto => is_round(scene),
    };
    let raw = if rings { ring_positions(scene, params) } else { shell_positions(scene, params) };
    let oriented = Exec::default().map(&raw, |(pos, level)| {
        if scene.world.distance_at(pos) < scene.lim.radius {
            return None;
        }
        let (yaw, seen) = best_yaw(pos, &scene.cam, &scene.mesh, &scene.world, scene.yaw_bins);
        (seen > 0).then(|| (Viewpoint::new(*pos, yaw), *level))
    });
    let (vps, levels): (Vec<Viewpoint>, Vec<usize>) = oriented.into_iter().flatten().unzip();
    log::debug!("library: {} of {} candidate positions kept", vps.len(), raw.len());
    if rings {
        ViewpointLibrary::assemble(vps, levels, scene)
    } else {
        ViewpointLibrary::from_viewpoints(vps, scene)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mesh::{compute_geodesics, generate_cylinder_tank, unit_cube};
    use crate::sensor::{visible_facets, CameraModel};
    use crate::trajectory::DynamicsLimits;
    use crate::world::WorldModel;

    pub(crate) fn tank_scene() -> Scene {
        let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 400).unwrap();
        let geo = compute_geodesics(&mesh).unwrap();
        let world = WorldModel::build(&mesh, 0.5, 10.0).unwrap();
        Scene::new(mesh, geo, world, CameraModel::standard(), DynamicsLimits::standard())
    }

    #[test]
    fn cylinder_rings() {
        let scene = tank_scene();
        let lib = build_library(&scene, &LibraryParams::default()).unwrap();
        assert_eq!(lib.len(), 60);
        for (i, vp) in lib.viewpoints().iter().enumerate() {
            assert!(scene.world.distance_at(&vp.position) >= scene.lim.radius);
            assert!(!visible_facets(vp, &scene.cam, &scene.mesh, &scene.world).is_empty());
            assert_eq!(lib.observations(i).len(), visible_facets(vp, &scene.cam, &scene.mesh, &scene.world).len());
        }
        assert!(lib.spacing() > 1.0);
        assert_eq!((0..60).map(|i| lib.level(i)).max(), Some(4));
    }

    #[test]
    fn offset_inside_radius_is_empty() {
        let mesh = unit_cube();
        let geo = compute_geodesics(&mesh).unwrap();
        let world = WorldModel::build(&mesh, 0.1, 10.0).unwrap();
        let scene = Scene::new(mesh, geo, world, CameraModel::standard(), DynamicsLimits::standard());
        let params = LibraryParams {
            d_view: 0.1,
            ..Default::default()
        };
        assert!(matches!(build_library(&scene, &params), Err(IppError::EmptyLibrary)));
    }

    #[test]
    fn shell_library_on_box() {
        // a long box is not round, so Auto picks the shell
        let mut b = crate::mesh::MeshBuilder::new();
        let (ex, ey, ez) = (Vec3::new(12.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0), Vec3::new(0.0, 0.0, 3.0));
        let o = Vec3::zeros();
        b.patch(o, ex, ey, 8, 2);
        b.patch(o + ez, ex, ey, 8, 2);
        b.patch(o, ex, ez, 8, 2);
        b.patch(o + ey, ex, ez, 8, 2);
        b.patch(o, ey, ez, 2, 2);
        b.patch(o + ex, ey, ez, 2, 2);
        let mesh = b.build().unwrap();
        let geo = compute_geodesics(&mesh).unwrap();
        let world = WorldModel::build(&mesh, 0.5, 10.0).unwrap();
        let scene = Scene::new(mesh, geo, world, CameraModel::standard(), DynamicsLimits::standard());
        assert!(!is_round(&scene));
        let lib = build_library(&scene, &LibraryParams::default()).unwrap();
        assert!(lib.len() > 10);
        for vp in lib.viewpoints() {
            let d = scene.world.distance_at(&vp.position);
            assert!((d - 4.0).abs() <= 1.5 + 1e-9, "{d}");
        }
    }
}
