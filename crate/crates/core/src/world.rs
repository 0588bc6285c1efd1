//! Distance field over a voxel grid, line-of-sight queries, and the
//! trajectory collision penalty.
//!
//! Distances are unsigned: the vehicle always operates outside a closed
//! surface, so only clearance magnitude matters.

use std::fmt::Write as _;

use crate::error::{IppError, Result};
use crate::fmt::sig9;
use crate::mesh::{SurfaceMesh, Vec3};
use crate::par::Exec;
use crate::trajectory::Trajectory;

pub const DEFAULT_MAX_VOXELS: usize = 40_000_000;

/// Voxels per side of the blocks used to prune triangles during the build.
const BLOCK: usize = 4;

/// Unsigned distance samples at voxel centers `origin + i·voxel`.
#[derive(Debug, Clone)]
pub struct WorldModel {
    origin: Vec3,
    voxel: f64,
    dims: [usize; 3],
    margin: f64,
    dist: Vec<f32>,
}

/// Closest-point distance from `p` to triangle `abc`.
pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Exact minimum over all facets; the reference for the grid build.
pub fn mesh_distance(mesh: &SurfaceMesh, p: &Vec3) -> f64 {
    (0..mesh.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            point_triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest power of two `≥ x` (at least 1). Dyadic sample counts make
/// halving the step produce a superset of the previous samples.
pub(crate) fn dyadic_count(x: f64) -> usize {
    let mut n = 1usize;
    while (n as f64) < x {
        n *= 2;
    }
    n
}

impl WorldModel {
    pub fn build(mesh: &SurfaceMesh, voxel: f64, margin: f64) -> Result<Self> {
        Self::build_with(mesh, voxel, margin, DEFAULT_MAX_VOXELS, Exec::default())
    }

    /// Grid covering the mesh bounding box inflated by `margin`, filled with
    /// exact point-to-mesh distances. Triangles are pruned per block of
    /// voxels with a bounding-sphere test that never discards the nearest
    /// triangle, so the result equals the brute-force minimum.
    pub fn build_with(mesh: &SurfaceMesh, voxel: f64, margin: f64, max_voxels: usize, exec: Exec) -> Result<Self> {
        if !(voxel > 0.0 && voxel.is_finite()) {
            return Err(IppError::param("voxel", "must be positive"));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(IppError::param("margin", "must be non-negative"));
        }
        let (lo, hi) = mesh.bounds();
        let origin = lo - Vec3::repeat(margin);
        let extent = hi - lo + Vec3::repeat(2.0 * margin);
        let dims = [0, 1, 2].map(|k| (extent[k] / voxel).ceil() as usize + 1);
        let voxels = dims[0].saturating_mul(dims[1]).saturating_mul(dims[2]);
        if voxels > max_voxels {
            return Err(IppError::GridTooLarge { voxels, cap: max_voxels });
        }

        let tris: Vec<[Vec3; 3]> = (0..mesh.len()).map(|f| mesh.triangle(f)).collect();
        let spheres: Vec<(Vec3, f64)> = tris
            .iter()
            .map(|[a, b, c]| {
                let center = (a + b + c) / 3.0;
                let radius = (a - center).norm().max((b - center).norm()).max((c - center).norm());
                (center, radius)
            })
            .collect();

        let blocks = dims.map(|d| d.div_ceil(BLOCK));
        let n_blocks = blocks[0] * blocks[1] * blocks[2];
        let block_half_diag = 0.5 * (BLOCK as f64 - 1.0) * voxel * 3f64.sqrt();
        let block_results: Vec<Vec<(usize, f32)>> = exec.map_range(n_blocks, |b| {
            let bi = [b % blocks[0], (b / blocks[0]) % blocks[1], b / (blocks[0] * blocks[1])];
            let start = bi.map(|i| i * BLOCK);
            let end = [0, 1, 2].map(|k| (start[k] + BLOCK).min(dims[k]));
            let center = origin
                + Vec3::new(
                    (start[0] + end[0] - 1) as f64,
                    (start[1] + end[1] - 1) as f64,
                    (start[2] + end[2] - 1) as f64,
                ) * (0.5 * voxel);
            // Upper bound for every voxel in the block.
            let nearest = spheres
                .iter()
                .enumerate()
                .min_by(|x, y| ((x.1 .0 - center).norm() - x.1 .1).total_cmp(&((y.1 .0 - center).norm() - y.1 .1)))
                .map(|(i, _)| i)
                .expect("mesh is non-empty");
            let [a, b2, c] = &tris[nearest];
            let upper = point_triangle_distance(&center, a, b2, c) + block_half_diag;
            let candidates: Vec<usize> = spheres
                .iter()
                .enumerate()
                .filter(|(_, (c, r))| (c - center).norm() - r - block_half_diag <= upper)
                .map(|(i, _)| i)
                .collect();
            let mut out = Vec::with_capacity(BLOCK * BLOCK * BLOCK);
            for k in start[2]..end[2] {
                for j in start[1]..end[1] {
                    for i in start[0]..end[0] {
                        let p = origin + Vec3::new(i as f64, j as f64, k as f64) * voxel;
                        let mut best = f64::INFINITY;
                        for &t in &candidates {
                            let (c, r) = &spheres[t];
                            if (p - c).norm() - r >= best {
                                continue;
                            }
                            let [a, b2, c2] = &tris[t];
                            best = best.min(point_triangle_distance(&p, a, b2, c2));
                        }
                        out.push((i + dims[0] * (j + dims[1] * k), best as f32));
                    }
                }
            }
            out
        });
        let mut dist = vec![0f32; voxels];
        for block in block_results {
            for (idx, d) in block {
                dist[idx] = d;
            }
        }
        Ok(Self {
            origin,
            voxel,
            dims,
            margin,
            dist,
        })
    }

    pub fn voxel(&self) -> f64 {
        self.voxel
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Lower and upper corner of the sampled region.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let span = Vec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.voxel;
        (self.origin, self.origin + span)
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.dist[i + self.dims[0] * (j + self.dims[1] * k)] as f64
    }

    /// Trilinear interpolation of the 8 surrounding samples; `+∞` outside the grid.
    pub fn distance_at(&self, p: &Vec3) -> f64 {
        let g = (p - self.origin) / self.voxel;
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for k in 0..3 {
            let max = (self.dims[k] - 1) as f64;
            if !(g[k] >= 0.0 && g[k] <= max) {
                log::trace!("distance query outside grid at {p:?}");
                return f64::INFINITY;
            }
            let cell = g[k].floor().min(max - 1.0).max(0.0);
            base[k] = cell as usize;
            frac[k] = g[k] - cell;
        }
        if self.dims.contains(&1) {
            return self.at(base[0], base[1], base[2]);
        }
        let [i, j, k] = base;
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.at(i, j, k), self.at(i + 1, j, k), fx);
        let c10 = lerp(self.at(i, j + 1, k), self.at(i + 1, j + 1, k), fx);
        let c01 = lerp(self.at(i, j, k + 1), self.at(i + 1, j, k + 1), fx);
        let c11 = lerp(self.at(i, j + 1, k + 1), self.at(i + 1, j + 1, k + 1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    /// True iff every sample along `ab` (spacing ≤ `step`, endpoints
    /// included) has clearance ≥ `clearance`. Symmetric in `a` and `b`.
    pub fn line_of_sight(&self, a: &Vec3, b: &Vec3, clearance: f64, step: f64) -> bool {
        assert!(step > 0.0, "line_of_sight step must be positive");
        let (from, to) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) { (a, b) } else { (b, a) };
        let n = dyadic_count((to - from).norm() / step);
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            self.distance_at(&(from + (to - from) * t)) >= clearance
        })
    }

    /// Number of trajectory samples closer than `radius` to the surface.
    pub fn count_violations(&self, traj: &Trajectory, radius: f64, step: f64) -> usize {
        traj.sample_positions(step)
            .iter()
            .filter(|p| self.distance_at(p) < radius)
            .count()
    }

    /// `w_coll · Σ g(p)` with `g = −1` for samples closer than `radius`.
    pub fn collision_penalty(&self, traj: &Trajectory, radius: f64, w_coll: f64, step: f64) -> f64 {
        -w_coll * self.count_violations(traj, radius, step) as f64
    }

    /// Horizontal slice nearest to height `z` as `x,y,distance` rows.
    pub fn slice_csv(&self, z: f64) -> String {
        let k = (((z - self.origin.z) / self.voxel).round().max(0.0) as usize).min(self.dims[2] - 1);
        let mut out = String::from("x,y,distance\n");
        for j in 0..self.dims[1] {
            for i in 0..self.dims[0] {
                let x = self.origin.x + i as f64 * self.voxel;
                let y = self.origin.y + j as f64 * self.voxel;
                let _ = writeln!(out, "{},{},{}", sig9(x), sig9(y), sig9(self.at(i, j, k)));
            }
        }
        out
    }
}

/// Collision-check step used when none is configured: half the smaller of
/// voxel size and vehicle radius.
pub fn default_step(voxel: f64, radius: f64) -> f64 {
    0.5 * voxel.min(radius)
}
