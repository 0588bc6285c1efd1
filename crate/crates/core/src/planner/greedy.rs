//! Sequential greedy waypoint search over the viewpoint library.

use nalgebra::DMatrix;

use super::{GainEvaluator, Scene, ViewpointLibrary};
use crate::field_map::{merge_observations, update_covariance};
use crate::par::Exec;
use crate::sensor::Viewpoint;
use crate::trajectory::segment_time;

/// `[start, c₁, …, c_N]` where each `cᵢ` maximizes gain per travel time
/// from the previous pick among library viewpoints in line of sight. The
/// covariance is updated with each pick's predicted observations before the
/// next search. Stops early when no candidate is reachable.
pub fn greedy_search(
    cov: &DMatrix<f64>,
    start: Viewpoint,
    lib: &ViewpointLibrary,
    n: usize,
    scene: &Scene,
    exec: Exec,
) -> Vec<Viewpoint> {
    let mut picks = vec![start];
    let mut cov = cov.clone();
    for _ in 0..n {
        let prev = *picks.last().expect("start");
        let ev = GainEvaluator::new(&cov);
        let scores = exec.map_range(lib.len(), |j| {
            let c = lib.get(j);
            let t = segment_time(&prev, c, &scene.lim);
            if t == 0.0 || !scene.line_of_sight(&prev.position, &c.position) {
                return None;
            }
            Some(ev.gain(lib.observations(j)) / t)
        });
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in scores.into_iter().enumerate() {
            if let Some(s) = s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
        }
        let Some((j, _)) = best else {
            log::warn!("greedy search: no reachable candidate after {} picks", picks.len() - 1);
            break;
        };
        picks.push(*lib.get(j));
        let (idx, noise) = merge_observations(lib.observations(j));
        match update_covariance(&cov, &idx, &noise) {
            Ok(next) => cov = next,
            Err(e) => log::warn!("greedy covariance update skipped: {e}"),
        }
    }
    picks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_map::{init_map, KernelParams};
    use crate::planner::library::tests::tank_scene;
    use crate::planner::{build_library, LibraryParams};

    #[test]
    fn deterministic_and_sequential_parallel_agree() {
        let scene = tank_scene();
        let lib = build_library(&scene, &LibraryParams::default()).unwrap();
        let map = init_map(&scene.geo, &KernelParams::new(1.0, 4.0), 0.0, "t").unwrap();
        let start = *lib.get(0);
        let a = greedy_search(map.cov(), start, &lib, 4, &scene, Exec::Sequential);
        let b = greedy_search(map.cov(), start, &lib, 4, &scene, Exec::default());
        let c = greedy_search(map.cov(), start, &lib, 4, &scene, Exec::default());
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(a.len(), 5);
        assert_eq!(a[0], start);
        for w in a.windows(2) {
            assert!(scene.line_of_sight(&w[0].position, &w[1].position));
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn prefers_unmeasured_region() {
        let scene = tank_scene();
        let full = build_library(&scene, &LibraryParams::default()).unwrap();
        let start = *full.get(0);
        // two candidates equidistant from the start, on either side
        let lib = full.filtered(|i| i == 1 || i == 11).unwrap();
        let map = init_map(&scene.geo, &KernelParams::new(1.0, 4.0), 0.0, "t").unwrap();
        let (idx, noise) = merge_observations(lib.observations(0));
        let measured = update_covariance(map.cov(), &idx, &noise).unwrap();
        let picks = greedy_search(&measured, start, &lib, 1, &scene, Exec::Sequential);
        assert_eq!(picks[1], *lib.get(1));
    }
}
