//! Reference planners (coverage sweep, random viewpoints) and alternative
//! prior covariances for the correlation ablation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::mesh::Vec3;
use crate::par::Exec;
use crate::planner::{Scene, ViewpointLibrary};
use crate::seed;
use crate::sensor::Viewpoint;
use crate::trajectory::segment_time;

/// Line-of-sight adjacency between library viewpoints.
#[derive(Debug, Clone)]
pub struct LosGraph {
    adj: Vec<Vec<usize>>,
}

impl LosGraph {
    pub fn build(lib: &ViewpointLibrary, scene: &Scene, exec: Exec) -> Self {
        let adj = exec.map_range(lib.len(), |i| {
            (0..lib.len())
                .filter(|&j| j != i && scene.line_of_sight(&lib.get(i).position, &lib.get(j).position))
                .collect()
        });
        Self { adj }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }
}

/// Fewest-hop chain of library viewpoints from an arbitrary position to
/// library viewpoint `to`, each hop in line of sight. The returned indices
/// end with `to` and exclude the starting position.
pub fn route_between(graph: &LosGraph, lib: &ViewpointLibrary, scene: &Scene, from: &Vec3, to: usize) -> Option<Vec<usize>> {
    let n = lib.len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        let p = &lib.get(i).position;
        if p == from || scene.line_of_sight(from, p) {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if i == to {
            let mut path = vec![i];
            let mut cur = i;
            while let Some(p) = parent[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            // drop a leading node that sits exactly at the start
            if path.len() > 1 && lib.get(path[0]).position == *from {
                path.remove(0);
            }
            return Some(path);
        }
        for &j in graph.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                parent[j] = Some(i);
                queue.push_back(j);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePlan {
    /// Set-cover viewpoints in sweep order.
    pub selected: Vec<usize>,
    /// Facets seen from each selected viewpoint.
    pub covered: Vec<Vec<usize>>,
    /// Selected viewpoints with line-of-sight detours inserted.
    pub route: Vec<usize>,
}

/// Greedy set cover of the facets observable from the library, ordered as
/// a level sweep that alternates angular direction per level.
pub fn plan_coverage(lib: &ViewpointLibrary, scene: &Scene, graph: &LosGraph) -> CoveragePlan {
    let n = scene.mesh.len();
    let sets: Vec<Vec<usize>> = (0..lib.len())
        .map(|i| lib.observations(i).iter().map(|o| o.0).collect())
        .collect();
    let mut covered = vec![false; n];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, s) in sets.iter().enumerate() {
            let gain = s.iter().filter(|&&f| !covered[f]).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        for &f in &sets[i] {
            covered[f] = true;
        }
        chosen.push(i);
    }

    let mut levels: Vec<usize> = chosen.iter().map(|&i| lib.level(i)).collect();
    levels.sort_unstable();
    levels.dedup();
    chosen.sort_by(|&a, &b| {
        let (la, lb) = (lib.level(a), lib.level(b));
        la.cmp(&lb).then_with(|| {
            let rank = levels.binary_search(&la).expect("present");
            let ord = lib.angle(a).total_cmp(&lib.angle(b));
            if rank % 2 == 0 {
                ord
            } else {
                ord.reverse()
            }
        })
    });

    let mut route: Vec<usize> = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        match route.last() {
            None => route.push(i),
            Some(&prev) if graph.connected(prev, i) => route.push(i),
            Some(&prev) => match route_between(graph, lib, scene, &lib.get(prev).position, i) {
                Some(path) => route.extend(path),
                None => log::warn!("coverage: viewpoint {i} unreachable from {prev}; skipped"),
            },
        }
    }
    CoveragePlan {
        covered: chosen.iter().map(|&i| sets[i].clone()).collect(),
        selected: chosen,
        route,
    }
}

/// `[start, v₁, …, v_n]` drawn uniformly from the library without
/// replacement (with replacement once the library is exhausted). Each draw
/// must be in line of sight of the previous one and differ from it; up to
/// 100 redraws are made before giving up with a partial list.
pub fn plan_random(lib: &ViewpointLibrary, start: &Viewpoint, n: usize, scene: &Scene, seed: u64) -> Vec<Viewpoint> {
    let mut rng = seed::rng(seed, &[0x72616e64]);
    let mut pool: Vec<usize> = (0..lib.len()).collect();
    let mut out = vec![*start];
    for _ in 0..n {
        if pool.is_empty() {
            pool = (0..lib.len()).collect();
        }
        let prev = *out.last().expect("start");
        let mut accepted = None;
        for _ in 0..100 {
            let k = rng.gen_range(0..pool.len());
            let c = lib.get(pool[k]);
            if segment_time(&prev, c, &scene.lim) > 0.0 && scene.line_of_sight(&prev.position, &c.position) {
                accepted = Some(k);
                break;
            }
        }
        let Some(k) = accepted else {
            log::warn!("random planner: no reachable draw after 100 attempts");
            break;
        };
        out.push(*lib.get(pool.swap_remove(k)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AltCovariance {
    Identity,
    RandomSpd,
}

/// Uncorrelated or randomly correlated prior covariance with a given trace.
pub fn alt_covariance(kind: AltCovariance, n: usize, target_trace: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(target_trace > 0.0) || n == 0 {
        return Err(IppError::param("target_trace", format!("need positive trace and n ≥ 1, got {target_trace}, n = {n}")));
    }
    Ok(match kind {
        AltCovariance::Identity => DMatrix::identity(n, n) * (target_trace / n as f64),
        AltCovariance::RandomSpd => {
            let mut rng = seed::rng(seed, &[0x737064]);
            let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let m = a.transpose() * a;
            let m = (&m + m.transpose()) * 0.5;
            let scale = target_trace / m.trace();
            m * scale
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_map::{init_map, merge_observations, update_covariance, KernelParams};
    use crate::mesh::{compute_geodesics, generate_cylinder_tank};
    use crate::planner::{build_library, LibraryParams};
    use crate::sensor::CameraModel;
    use crate::trajectory::DynamicsLimits;
    use crate::world::WorldModel;
    use std::f64::consts::PI;

    fn scene() -> Scene {
        let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 400).unwrap();
        let geo = compute_geodesics(&mesh).unwrap();
        let world = WorldModel::build(&mesh, 0.5, 10.0).unwrap();
        Scene::new(mesh, geo, world, CameraModel::standard(), DynamicsLimits::standard())
    }

    #[test]
    fn coverage_covers_observable_and_sweeps_levels() {
        let s = scene();
        let lib = build_library(&s, &LibraryParams::default()).unwrap();
        let graph = LosGraph::build(&lib, &s, Exec::default());
        let plan = plan_coverage(&lib, &s, &graph);
        let mut observable: Vec<usize> = (0..lib.len()).flat_map(|i| lib.observations(i).iter().map(|o| o.0)).collect();
        observable.sort_unstable();
        observable.dedup();
        let mut got: Vec<usize> = plan.covered.iter().flatten().copied().collect();
        got.sort_unstable();
        got.dedup();
        assert_eq!(got, observable);
        let levels: Vec<usize> = plan.selected.iter().map(|&i| lib.level(i)).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        for w in plan.route.windows(2) {
            assert!(graph.connected(w[0], w[1]), "route hop {w:?} lacks line of sight");
        }
        let mut uniq = plan.selected.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), plan.selected.len());
    }

    #[test]
    fn coverage_single_viewpoint() {
        let s = scene();
        let lib = build_library(&s, &LibraryParams::default()).unwrap().filtered(|i| i == 7).unwrap();
        let graph = LosGraph::build(&lib, &s, Exec::Sequential);
        let plan = plan_coverage(&lib, &s, &graph);
        assert_eq!(plan.selected, vec![0]);
        assert_eq!(plan.route, vec![0]);
    }

    #[test]
    fn coverage_run_reduces_every_covered_variance() {
        let s = scene();
        let lib = build_library(&s, &LibraryParams::default()).unwrap();
        let graph = LosGraph::build(&lib, &s, Exec::default());
        let plan = plan_coverage(&lib, &s, &graph);
        let prior = init_map(&s.geo, &KernelParams::new(1.0, 4.0), 0.0, "t").unwrap();
        let mut cov = prior.cov().clone();
        for &i in &plan.route {
            let (idx, noise) = merge_observations(lib.observations(i));
            cov = update_covariance(&cov, &idx, &noise).unwrap();
        }
        for f in plan.covered.iter().flatten() {
            assert!(cov[(*f, *f)] < prior.cov()[(*f, *f)]);
        }
    }

    #[test]
    fn random_is_reproducible_and_permutes_small_library() {
        let s = scene();
        let lib = build_library(&s, &LibraryParams::default()).unwrap();
        let start = *lib.get(0);
        let a = plan_random(&lib, &start, 4, &s, 11);
        assert_eq!(a, plan_random(&lib, &start, 4, &s, 11));
        assert_eq!(a.len(), 5);
        // four neighbours on one level, all mutually visible
        let small = lib.filtered(|i| lib.level(i) == 2 && (0..4).contains(&(i % 12))).unwrap();
        assert_eq!(small.len(), 4);
        let here = Viewpoint::new(Vec3::new(10.0 * (PI / 4.0).cos(), 10.0 * (PI / 4.0).sin(), small.get(0).position.z), 0.0);
        let perm = plan_random(&small, &here, 4, &s, 3);
        let mut seen: Vec<usize> = perm[1..]
            .iter()
            .map(|v| (0..4).find(|&j| small.get(j) == v).unwrap())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn random_first_draw_uniform() {
        let s = scene();
        let lib = build_library(&s, &LibraryParams::default()).unwrap();
        let small = lib.filtered(|i| lib.level(i) == 2 && (0..4).contains(&(i % 12))).unwrap();
        let here = Viewpoint::new(Vec3::new(10.0 * (PI / 4.0).cos(), 10.0 * (PI / 4.0).sin(), small.get(0).position.z), 0.0);
        let trials = 10_000;
        let mut counts = [0usize; 4];
        for t in 0..trials {
            let pick = plan_random(&small, &here, 1, &s, t);
            counts[(0..4).find(|&j| small.get(j) == &pick[1]).unwrap()] += 1;
        }
        let expected = trials as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 1% critical value with 3 degrees of freedom
        assert!(chi2 < 11.345, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn alt_covariances() {
        let id = alt_covariance(AltCovariance::Identity, 4, 8.0, 0).unwrap();
        assert_eq!(id, DMatrix::identity(4, 4) * 2.0);
        let a = alt_covariance(AltCovariance::RandomSpd, 30, 12.5, 9).unwrap();
        assert_eq!(a, alt_covariance(AltCovariance::RandomSpd, 30, 12.5, 9).unwrap());
        assert!((a.trace() - 12.5).abs() < 1e-9);
        assert_eq!(a, a.transpose());
        assert!(a.clone().symmetric_eigen().eigenvalues.min() >= 0.0);
        assert!(alt_covariance(AltCovariance::Identity, 4, 0.0, 0).is_err());
    }
}
