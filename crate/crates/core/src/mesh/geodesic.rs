//! All-pairs geodesic distances on the facet-center adjacency graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use super::SurfaceMesh;
use crate::error::{IppError, Result};
use crate::matrix_io;
use crate::par::Exec;

/// Dense symmetric `n × n` table of geodesic distances between facet centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    n: usize,
    dist: Vec<f64>,
}

impl GeodesicField {
    /// Wrap a row-major table, checking shape, symmetry and finiteness.
    pub fn from_row_major(n: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != n * n {
            return Err(IppError::Dimension {
                expected: n * n,
                got: dist.len(),
            });
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(IppError::InvalidMesh(format!("geodesic diagonal {i} is nonzero")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(IppError::Disconnected { from: i, to: j });
                }
                if d != dist[j * n + i] {
                    return Err(IppError::InvalidMesh(format!("geodesic table asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, dist })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(mesh: &SurfaceMesh, source: usize, out: &mut [f64]) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let centers = mesh.centers();
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if d > out[u] {
            continue;
        }
        for &v in &mesh.adjacency()[u] {
            let nd = d + (centers[u] - centers[v]).norm();
            if nd < out[v] {
                out[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
}

/// Graph geodesics using the default execution mode.
pub fn compute_geodesics(mesh: &SurfaceMesh) -> Result<GeodesicField> {
    compute_geodesics_with(mesh, Exec::default())
}

/// One Dijkstra sweep per source facet; sources run in parallel under
/// [`Exec::Parallel`]. The result is symmetrized by taking the smaller of
/// the two directed sums.
pub fn compute_geodesics_with(mesh: &SurfaceMesh, exec: Exec) -> Result<GeodesicField> {
    let n = mesh.len();
    let mut dist = vec![0.0; n * n];
    exec.for_each_chunk(&mut dist, n, |row, start| dijkstra(mesh, start / n, row));
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (dist[i * n + j], dist[j * n + i]);
            if !a.is_finite() {
                return Err(IppError::Disconnected { from: i, to: j });
            }
            let m = a.min(b);
            dist[i * n + j] = m;
            dist[j * n + i] = m;
        }
    }
    Ok(GeodesicField { n, dist })
}

/// Load the table from `<cache_dir>/<mesh hash>.geo`, computing and writing
/// it on a miss. A corrupt or mismatched cache file is recomputed.
pub fn load_or_compute_geodesics(mesh: &SurfaceMesh, cache_dir: &Path) -> Result<GeodesicField> {
    let path = cache_dir.join(format!("{}.geo", mesh.content_hash()));
    if path.exists() {
        match matrix_io::read_matrix(&path).and_then(|(n, d)| GeodesicField::from_row_major(n, d)) {
            Ok(g) if g.len() == mesh.len() => return Ok(g),
            Ok(_) => log::warn!("geodesic cache {} has wrong size; recomputing", path.display()),
            Err(e) => log::warn!("ignoring geodesic cache {}: {e}", path.display()),
        }
    }
    let geo = compute_geodesics(mesh)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| IppError::io(cache_dir, e))?;
    matrix_io::write_matrix(&path, geo.n, &geo.dist)?;
    Ok(geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cylinder_tank, unit_cube};

    fn floyd_warshall(mesh: &SurfaceMesh) -> Vec<f64> {
        let n = mesh.len();
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
            for &j in &mesh.adjacency()[i] {
                d[i * n + j] = (mesh.centers()[i] - mesh.centers()[j]).norm();
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        d
    }

    /// Exhaustive simple-path enumeration; only viable for tiny graphs.
    fn brute_force(mesh: &SurfaceMesh, s: usize, t: usize) -> f64 {
        fn walk(mesh: &SurfaceMesh, u: usize, t: usize, len: f64, seen: &mut Vec<bool>, best: &mut f64) {
            if u == t {
                *best = best.min(len);
                return;
            }
            for &v in &mesh.adjacency()[u] {
                if !seen[v] {
                    seen[v] = true;
                    let step = (mesh.centers()[u] - mesh.centers()[v]).norm();
                    walk(mesh, v, t, len + step, seen, best);
                    seen[v] = false;
                }
            }
        }
        let mut seen = vec![false; mesh.len()];
        seen[s] = true;
        let mut best = f64::INFINITY;
        walk(mesh, s, t, 0.0, &mut seen, &mut best);
        best
    }

    #[test]
    fn adjacent_and_self() {
        let mesh = unit_cube();
        let geo = compute_geodesics(&mesh).unwrap();
        for i in 0..mesh.len() {
            assert_eq!(geo.get(i, i), 0.0);
            for &j in &mesh.adjacency()[i] {
                let chord = (mesh.centers()[i] - mesh.centers()[j]).norm();
                assert!((geo.get(i, j) - chord).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_path_enumeration() {
        for mesh in [unit_cube(), generate_cylinder_tank(1.0, 1.0, 0.1, 8).unwrap()] {
            let geo = compute_geodesics(&mesh).unwrap();
            for s in 0..mesh.len() {
                for t in 0..mesh.len() {
                    let oracle = brute_force(&mesh, s, t);
                    assert!((geo.get(s, t) - oracle).abs() < 1e-12, "({s},{t})");
                }
            }
        }
    }

    #[test]
    fn matches_floyd_warshall() {
        for target in [8, 20, 40] {
            let mesh = generate_cylinder_tank(2.0, 3.0, 0.5, target).unwrap();
            assert!(mesh.len() <= 50);
            let geo = compute_geodesics(&mesh).unwrap();
            let fw = floyd_warshall(&mesh);
            for (a, b) in geo.as_slice().iter().zip(&fw) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
        }
    }

    #[test]
    fn invariants_hold() {
        let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 120).unwrap();
        let geo = compute_geodesics(&mesh).unwrap();
        let n = mesh.len();
        for i in 0..n {
            for j in 0..n {
                let chord = (mesh.centers()[i] - mesh.centers()[j]).norm();
                assert!(geo.get(i, j) >= chord - 1e-9);
                assert_eq!(geo.get(i, j), geo.get(j, i));
            }
        }
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(5) {
                for k in (0..n).step_by(3) {
                    assert!(geo.get(i, k) <= geo.get(i, j) + geo.get(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 200).unwrap();
        let a = compute_geodesics_with(&mesh, Exec::Sequential).unwrap();
        let b = compute_geodesics_with(&mesh, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 100).unwrap();
        let first = load_or_compute_geodesics(&mesh, dir.path()).unwrap();
        let path = dir.path().join(format!("{}.geo", mesh.content_hash()));
        assert!(path.exists());
        let second = load_or_compute_geodesics(&mesh, dir.path()).unwrap();
        assert_eq!(first, second);
        std::fs::write(&path, b"garbage").unwrap();
        assert_eq!(load_or_compute_geodesics(&mesh, dir.path()).unwrap(), first);
    }
}
