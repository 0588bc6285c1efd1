//! Triangle surface meshes: per-facet geometry, adjacency, and geodesics.

mod generate;
mod geodesic;
mod io;

use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{IppError, Result};

pub use generate::{composite_airplane, generate_cylinder_tank, unit_cube, MeshBuilder};
pub use geodesic::{compute_geodesics, compute_geodesics_with, load_or_compute_geodesics, GeodesicField};
pub use io::{load_mesh, parse_obj, parse_stl, write_obj, write_stl};

pub type Vec3 = Vector3<f64>;

/// Facets whose doubled area falls below this are treated as degenerate.
const DEGENERATE_AREA: f64 = 1e-14;

/// Watertight triangle mesh with cached per-facet geometry.
///
/// Normals point outward; the facet adjacency graph is connected.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    facets: Vec<[usize; 3]>,
    centers: Vec<Vec3>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl SurfaceMesh {
    /// Build a mesh from raw vertices and triangles. Degenerate facets are
    /// dropped, winding is made consistent and oriented outward, and the
    /// adjacency graph is checked for connectivity.
    pub fn from_triangles(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut facets = Vec::with_capacity(triangles.len());
        let mut dropped = 0usize;
        for (f, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(IppError::InvalidMesh(format!(
                    "facet {f} references vertex out of range (have {nv})"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                dropped += 1;
                continue;
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            if (b - a).cross(&(c - a)).norm() < DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            facets.push(*tri);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate facet(s)");
        }
        if facets.is_empty() {
            return Err(IppError::InvalidMesh("mesh has no valid facets".into()));
        }

        let adjacency = build_adjacency(&facets)?;
        check_connected(&adjacency)?;
        orient_consistently(&mut facets, &adjacency);

        let mut mesh = SurfaceMesh {
            vertices,
            centers: Vec::new(),
            normals: Vec::new(),
            areas: Vec::new(),
            facets,
            adjacency,
        };
        mesh.refresh_geometry();
        if mesh.outward_votes() < 0 {
            for f in mesh.facets.iter_mut() {
                f.swap(1, 2);
            }
            mesh.refresh_geometry();
        }
        Ok(mesh)
    }

    fn refresh_geometry(&mut self) {
        let n = self.facets.len();
        self.centers = Vec::with_capacity(n);
        self.normals = Vec::with_capacity(n);
        self.areas = Vec::with_capacity(n);
        for tri in &self.facets {
            let [a, b, c] = tri.map(|i| self.vertices[i]);
            let cross = (b - a).cross(&(c - a));
            let len = cross.norm();
            self.centers.push((a + b + c) / 3.0);
            self.normals.push(cross / len);
            self.areas.push(0.5 * len);
        }
    }

    /// Count of facets pointing away from the centroid minus those pointing
    /// toward it; ties fall back to the area-weighted sum.
    fn outward_votes(&self) -> i64 {
        let centroid = self.centroid();
        let mut votes = 0i64;
        let mut weighted = 0.0;
        for i in 0..self.len() {
            let d = self.normals[i].dot(&(self.centers[i] - centroid));
            weighted += d * self.areas[i];
            if d > 0.0 {
                votes += 1;
            } else if d < 0.0 {
                votes -= 1;
            }
        }
        if votes == 0 {
            if weighted < 0.0 {
                -1
            } else {
                1
            }
        } else {
            votes
        }
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[[usize; 3]] {
        &self.facets
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        self.facets[f].map(|i| self.vertices[i])
    }

    /// Area-weighted centroid of the facet centers.
    pub fn centroid(&self) -> Vec3 {
        let total: f64 = self.areas.iter().sum();
        self.centers
            .iter()
            .zip(&self.areas)
            .fold(Vec3::zeros(), |acc, (c, a)| acc + c * *a)
            / total
    }

    /// Axis-aligned bounding box over the vertices.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &f in &self.facets {
            for i in f {
                lo = lo.inf(&self.vertices[i]);
                hi = hi.sup(&self.vertices[i]);
            }
        }
        (lo, hi)
    }

    /// SHA-256 over the facet geometry, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.facets.len() as u64).to_le_bytes());
        for tri in &self.facets {
            for &i in tri {
                for k in 0..3 {
                    hasher.update(self.vertices[i][k].to_le_bytes());
                }
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn build_adjacency(facets: &[[usize; 3]]) -> Result<Vec<Vec<usize>>> {
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, tri) in facets.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    let mut adjacency = vec![Vec::with_capacity(3); facets.len()];
    for (edge, owners) in edges {
        match owners.as_slice() {
            [_] => {}
            [f, g] if f != g => {
                adjacency[*f].push(*g);
                adjacency[*g].push(*f);
            }
            _ => {
                return Err(IppError::InvalidMesh(format!(
                    "non-manifold edge ({}, {}) shared by {} facets",
                    edge.0,
                    edge.1,
                    owners.len()
                )))
            }
        }
    }
    for list in adjacency.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    Ok(adjacency)
}

fn check_connected(adjacency: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(f) = queue.pop_front() {
        for &g in &adjacency[f] {
            if !seen[g] {
                seen[g] = true;
                queue.push_back(g);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(to) => Err(IppError::Disconnected { from: 0, to }),
        None => Ok(()),
    }
}

fn has_directed_edge(tri: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b)
}

/// Flood-fill from facet 0 so that every shared edge is traversed in
/// opposite directions by its two facets.
fn orient_consistently(facets: &mut [[usize; 3]], adjacency: &[Vec<usize>]) {
    let mut visited = vec![false; facets.len()];
    let mut queue = VecDeque::from([0usize]);
    visited[0] = true;
    let mut conflicts = 0usize;
    while let Some(f) = queue.pop_front() {
        let tri = facets[f];
        for &g in &adjacency[f] {
            let shared: Vec<usize> = tri.iter().copied().filter(|v| facets[g].contains(v)).collect();
            let (a, b) = (shared[0], shared[1]);
            let f_ab = has_directed_edge(&tri, a, b);
            let g_ab = has_directed_edge(&facets[g], a, b);
            if !visited[g] {
                if f_ab == g_ab {
                    facets[g].swap(1, 2);
                }
                visited[g] = true;
                queue.push_back(g);
            } else if f_ab == g_ab {
                conflicts += 1;
            }
        }
    }
    if conflicts > 0 {
        log::warn!("mesh is not orientable: {conflicts} inconsistent edge(s) remain");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_topology() {
        let mesh = unit_cube();
        assert_eq!(mesh.len(), 12);
        for (f, nbrs) in mesh.adjacency().iter().enumerate() {
            assert_eq!(nbrs.len(), 3, "facet {f}");
            for &g in nbrs {
                assert!(mesh.adjacency()[g].contains(&f));
            }
        }
        for n in mesh.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixes_flipped_facets() {
        let cube = unit_cube();
        let mut tris: Vec<[usize; 3]> = cube.facets().to_vec();
        for t in tris.iter_mut().step_by(3) {
            t.swap(0, 1);
        }
        let mesh = SurfaceMesh::from_triangles(cube.vertices().to_vec(), tris).unwrap();
        let c = mesh.centroid();
        for i in 0..mesh.len() {
            assert!(mesh.normals()[i].dot(&(mesh.centers()[i] - c)) > 0.0);
        }
    }

    #[test]
    fn inverted_mesh_is_flipped_outward() {
        let cube = unit_cube();
        let tris: Vec<[usize; 3]> = cube.facets().iter().map(|t| [t[0], t[2], t[1]]).collect();
        let mesh = SurfaceMesh::from_triangles(cube.vertices().to_vec(), tris).unwrap();
        let c = mesh.centroid();
        assert!(mesh.normals()[0].dot(&(mesh.centers()[0] - c)) > 0.0);
    }

    #[test]
    fn degenerate_facets_dropped() {
        let cube = unit_cube();
        let mut verts = cube.vertices().to_vec();
        let mut tris = cube.facets().to_vec();
        verts.push(Vec3::new(0.5, 0.5, 0.0));
        let extra = verts.len() - 1;
        // collinear sliver attached to nothing but sharing a cube edge endpoint pair
        tris.push([0, 0, extra]);
        let mesh = SurfaceMesh::from_triangles(verts, tris).unwrap();
        assert_eq!(mesh.len(), 12);
    }

    #[test]
    fn disconnected_rejected() {
        let cube = unit_cube();
        let mut verts = cube.vertices().to_vec();
        let mut tris = cube.facets().to_vec();
        let off = verts.len();
        verts.extend(cube.vertices().iter().map(|v| v + Vec3::new(5.0, 0.0, 0.0)));
        tris.extend(cube.facets().iter().map(|t| t.map(|i| i + off)));
        match SurfaceMesh::from_triangles(verts, tris) {
            Err(IppError::Disconnected { from: 0, to }) => assert!(to >= 12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn content_hash_is_stable() {
        assert_eq!(unit_cube().content_hash(), unit_cube().content_hash());
        let tank = generate_cylinder_tank(1.0, 1.0, 0.1, 8).unwrap();
        assert_ne!(unit_cube().content_hash(), tank.content_hash());
    }
}
