//! Fixed-mount camera: visibility conditions, range-dependent noise and
//! simulated measurements.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::field_map::ObservationBatch;
use crate::ground_truth::GroundTruthField;
use crate::mesh::{SurfaceMesh, Vec3};
use crate::par::Exec;
use crate::world::WorldModel;

/// Wrap an angle to `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest rotation from `b` to `a`, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: Vec3,
    pub yaw: f64,
}

impl Viewpoint {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_angle(yaw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Horizontal field of view, degrees.
    pub fov_h: f64,
    /// Vertical field of view, degrees.
    pub fov_v: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Maximum incidence angle, degrees.
    pub alpha_max: f64,
    /// Downward pitch of the mount, degrees.
    pub pitch: f64,
    pub noise_a: f64,
    pub noise_b: f64,
    #[serde(default)]
    pub occlusion_check: bool,
}

impl CameraModel {
    /// 60×60° FoV, [2, 8] m range, 70° incidence, 15° pitch, a = 0.05, b = 0.2.
    pub fn standard() -> Self {
        Self {
            fov_h: 60.0,
            fov_v: 60.0,
            d_min: 2.0,
            d_max: 8.0,
            alpha_max: 70.0,
            pitch: 15.0,
            noise_a: 0.05,
            noise_b: 0.2,
            occlusion_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("fov_h", self.fov_h > 0.0 && self.fov_h <= 180.0),
            ("fov_v", self.fov_v > 0.0 && self.fov_v <= 180.0),
            ("d_min", self.d_min > 0.0 && self.d_min < self.d_max),
            ("d_max", self.d_max.is_finite()),
            ("alpha_max", self.alpha_max > 0.0 && self.alpha_max < 90.0),
            ("pitch", self.pitch.abs() <= 90.0),
            ("noise_a", self.noise_a > 0.0),
            ("noise_b", self.noise_b > 0.0),
        ];
        for (field, ok) in checks {
            if !ok {
                return Err(IppError::param(field, format!("out of range in {self:?}")));
            }
        }
        Ok(())
    }

    /// Forward, left and up axes of the camera for a given yaw.
    pub fn frame(&self, yaw: f64) -> (Vec3, Vec3, Vec3) {
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let (sy, cy) = yaw.sin_cos();
        let forward = Vec3::new(cy * cp, sy * cp, -sp);
        let left = Vec3::new(-sy, cy, 0.0);
        let up = Vec3::new(cy * sp, sy * sp, cp);
        (forward, left, up)
    }

    fn in_frustum(&self, rel: &Vec3, yaw: f64) -> bool {
        let (f, l, u) = self.frame(yaw);
        let x = rel.dot(&f);
        if x <= 0.0 {
            return false;
        }
        let az = (rel.dot(&l) / x).atan().abs();
        let el = (rel.dot(&u) / x).atan().abs();
        az <= 0.5 * self.fov_h.to_radians() && el <= 0.5 * self.fov_v.to_radians()
    }
}

/// `a(1 − e^{−b d})`.
pub fn noise_variance(d: f64, cam: &CameraModel) -> f64 {
    cam.noise_a * (1.0 - (-cam.noise_b * d).exp())
}

/// Occlusion rays end slightly above the facet so the target surface itself
/// does not block them. Offsets are in voxels.
const OCCLUSION_LIFT: f64 = 1.5;
const OCCLUSION_CLEARANCE: f64 = 0.75;
const OCCLUSION_STEP: f64 = 0.2;

fn line_of_sight_to_facet(world: &WorldModel, mesh: &SurfaceMesh, from: &Vec3, facet: usize) -> bool {
    let v = world.voxel();
    let target = mesh.centers()[facet] + mesh.normals()[facet] * (OCCLUSION_LIFT * v);
    world.line_of_sight(from, &target, OCCLUSION_CLEARANCE * v, OCCLUSION_STEP * v)
}

/// Facets passing the range and incidence tests from `position`, with their
/// distances. These tests do not depend on yaw.
fn range_incidence_candidates(position: &Vec3, cam: &CameraModel, mesh: &SurfaceMesh) -> Vec<(usize, f64)> {
    let cos_alpha = cam.alpha_max.to_radians().cos();
    let mut out = Vec::new();
    for (i, (c, n)) in mesh.centers().iter().zip(mesh.normals()).enumerate() {
        let to_cam = position - c;
        let d = to_cam.norm();
        if d < cam.d_min || d > cam.d_max {
            continue;
        }
        if n.dot(&to_cam) < cos_alpha * d {
            continue;
        }
        out.push((i, d));
    }
    out
}

/// Visible facets with their camera distances, ascending by facet index.
pub fn visible_with_range(vp: &Viewpoint, cam: &CameraModel, mesh: &SurfaceMesh, world: &WorldModel) -> Vec<(usize, f64)> {
    range_incidence_candidates(&vp.position, cam, mesh)
        .into_iter()
        .filter(|&(i, _)| cam.in_frustum(&(mesh.centers()[i] - vp.position), vp.yaw))
        .filter(|&(i, _)| !cam.occlusion_check || line_of_sight_to_facet(world, mesh, &vp.position, i))
        .collect()
}

pub fn visible_facets(vp: &Viewpoint, cam: &CameraModel, mesh: &SurfaceMesh, world: &WorldModel) -> Vec<usize> {
    visible_with_range(vp, cam, mesh, world).into_iter().map(|(i, _)| i).collect()
}

/// Predicted `(facet, noise variance)` pairs for a viewpoint.
pub fn predicted_observations(vp: &Viewpoint, cam: &CameraModel, mesh: &SurfaceMesh, world: &WorldModel) -> Vec<(usize, f64)> {
    visible_with_range(vp, cam, mesh, world)
        .into_iter()
        .map(|(i, d)| (i, noise_variance(d, cam)))
        .collect()
}

/// Noisy readings of `truth` on the visible facets, or `None` when nothing
/// is visible.
pub fn simulate_measurement(
    vp: &Viewpoint,
    truth: &GroundTruthField,
    cam: &CameraModel,
    mesh: &SurfaceMesh,
    world: &WorldModel,
    seed: u64,
) -> Option<ObservationBatch> {
    let seen = visible_with_range(vp, cam, mesh, world);
    if seen.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = Vec::with_capacity(seen.len());
    let mut values = Vec::with_capacity(seen.len());
    let mut vars = Vec::with_capacity(seen.len());
    for (i, d) in seen {
        let var = noise_variance(d, cam);
        let eps = Normal::new(0.0, var.sqrt()).expect("finite variance").sample(&mut rng);
        idx.push(i);
        values.push(truth.value(i) + eps);
        vars.push(var);
    }
    Some(ObservationBatch::new(idx, values, vars).expect("visible facets form a valid batch"))
}

/// `ψ_j = −π + 2π(j+1)/bins`, ascending and ending at π.
pub fn yaw_candidates(bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|j| normalize_angle(-PI + 2.0 * PI * (j + 1) as f64 / bins as f64))
        .collect()
}

/// Yaw candidate seeing the most facets from `position`; ties go to the
/// smallest yaw. Occlusion is tested at most once per facet.
pub fn best_yaw(position: &Vec3, cam: &CameraModel, mesh: &SurfaceMesh, world: &WorldModel, bins: usize) -> (f64, usize) {
    let cands = range_incidence_candidates(position, cam, mesh);
    let mut los: Vec<Option<bool>> = vec![None; cands.len()];
    let mut best = (f64::NAN, 0usize);
    for (j, yaw) in yaw_candidates(bins).into_iter().enumerate() {
        let mut count = 0;
        for (k, &(i, _)) in cands.iter().enumerate() {
            if !cam.in_frustum(&(mesh.centers()[i] - position), yaw) {
                continue;
            }
            if cam.occlusion_check {
                let clear = *los[k].get_or_insert_with(|| line_of_sight_to_facet(world, mesh, position, i));
                if !clear {
                    continue;
                }
            }
            count += 1;
        }
        if j == 0 || count > best.1 {
            best = (yaw, count);
        }
    }
    best
}

/// Best yaw for every position, in input order.
pub fn build_yaw_library(positions: &[Vec3], cam: &CameraModel, mesh: &SurfaceMesh, world: &WorldModel, bins: usize) -> Result<Vec<f64>> {
    if bins < 4 {
        return Err(IppError::param("yaw_bins", format!("must be ≥ 4, got {bins}")));
    }
    Ok(Exec::default().map(positions, |p| best_yaw(p, cam, mesh, world, bins).0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_truth::GroundTruthField;
    use crate::mesh::{generate_cylinder_tank, MeshBuilder};
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn tank() -> &'static (SurfaceMesh, WorldModel) {
        static T: OnceLock<(SurfaceMesh, WorldModel)> = OnceLock::new();
        T.get_or_init(|| {
            let mesh = generate_cylinder_tank(6.0, 20.0, 1.2, 400).unwrap();
            let world = WorldModel::build(&mesh, 0.5, 10.0).unwrap();
            (mesh, world)
        })
    }

    /// A thin square plate facing +x at x = 0, centered at the origin.
    fn plate() -> (SurfaceMesh, WorldModel) {
        let mut b = MeshBuilder::new();
        let h = 0.5;
        let t = 0.05;
        let p = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        // front (+x), back (−x) and the four thin sides
        b.quad(p(0.0, -h, -h), p(0.0, h, -h), p(0.0, h, h), p(0.0, -h, h));
        b.quad(p(-t, -h, -h), p(-t, -h, h), p(-t, h, h), p(-t, h, -h));
        b.quad(p(-t, -h, -h), p(-t, h, -h), p(0.0, h, -h), p(0.0, -h, -h));
        b.quad(p(-t, -h, h), p(0.0, -h, h), p(0.0, h, h), p(-t, h, h));
        b.quad(p(-t, -h, -h), p(0.0, -h, -h), p(0.0, -h, h), p(-t, -h, h));
        b.quad(p(-t, h, -h), p(-t, h, h), p(0.0, h, h), p(0.0, h, -h));
        let mesh = b.build().unwrap();
        let world = WorldModel::build(&mesh, 0.25, 10.0).unwrap();
        (mesh, world)
    }

    fn level_cam() -> CameraModel {
        CameraModel {
            pitch: 0.0,
            ..CameraModel::standard()
        }
    }

    #[test]
    fn angles_wrap() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(angle_diff(PI - 0.1, -PI + 0.1), -0.2, epsilon = 1e-12);
        assert_eq!(Viewpoint::new(Vec3::zeros(), 7.0).yaw, normalize_angle(7.0));
    }

    #[test]
    fn frame_is_orthonormal() {
        let cam = CameraModel::standard();
        let (f, l, u) = cam.frame(0.7);
        assert_relative_eq!(f.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(l.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.cross(&l), u, epsilon = 1e-12);
        assert!(f.z < 0.0, "pitch looks down");
    }

    #[test]
    fn facing_facet_visible_and_range_boundary() {
        let (mesh, world) = plate();
        let cam = level_cam();
        let front: Vec<usize> = (0..mesh.len()).filter(|&i| mesh.normals()[i].x > 0.9).collect();
        assert_eq!(front.len(), 2);
        let mid = 0.5 * (cam.d_min + cam.d_max);
        let vis = visible_facets(&Viewpoint::new(Vec3::new(mid, 0.0, 0.0), PI), &cam, &mesh, &world);
        for f in &front {
            assert!(vis.contains(f));
        }
        // move out so that each front facet center sits at d_max + 0.01
        let c = mesh.centers()[front[0]];
        let far = Vec3::new(cam.d_max + 0.01 + c.x, c.y, c.z);
        let vis = visible_facets(&Viewpoint::new(far, PI), &cam, &mesh, &world);
        assert!(!vis.contains(&front[0]));
        // looking away
        let vis = visible_facets(&Viewpoint::new(Vec3::new(mid, 0.0, 0.0), 0.0), &cam, &mesh, &world);
        assert!(vis.is_empty());
    }

    /// Brute force with a rotation-matrix camera frame and explicit angles.
    fn brute_visible(vp: &Viewpoint, cam: &CameraModel, mesh: &SurfaceMesh) -> Vec<usize> {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), vp.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), cam.pitch.to_radians());
        let inv = rot.inverse();
        (0..mesh.len())
            .filter(|&i| {
                let rel = inv * (mesh.centers()[i] - vp.position);
                let d = rel.norm();
                let az = rel.y.atan2(rel.x).to_degrees();
                let el = rel.z.atan2(rel.x).to_degrees();
                let to_cam = (vp.position - mesh.centers()[i]) / d;
                let alpha = mesh.normals()[i].dot(&to_cam).clamp(-1.0, 1.0).acos().to_degrees();
                rel.x > 0.0
                    && az.abs() <= cam.fov_h / 2.0
                    && el.abs() <= cam.fov_v / 2.0
                    && d >= cam.d_min
                    && d <= cam.d_max
                    && alpha <= cam.alpha_max
            })
            .collect()
    }

    #[test]
    fn cylinder_visible_set_matches_brute_force() {
        let (mesh, world) = tank();
        let cam = CameraModel::standard();
        for (k, &(ang, z)) in [(0.0, 10.0), (1.3, 4.0), (-2.5, 18.0), (3.0, 21.0)].iter().enumerate() {
            let pos = Vec3::new(10.0 * f64::cos(ang), 10.0 * f64::sin(ang), z);
            let vp = Viewpoint::new(pos, ang + PI + 0.1 * k as f64);
            let got = visible_facets(&vp, &cam, mesh, world);
            assert!(!got.is_empty());
            assert_eq!(got, brute_visible(&vp, &cam, mesh));
        }
    }

    #[test]
    fn noise_examples() {
        let cam = CameraModel::standard();
        assert_eq!(noise_variance(0.0, &cam), 0.0);
        assert_relative_eq!(noise_variance(2.0, &cam), 0.05 * (1.0 - (-0.4f64).exp()), max_relative = 1e-15);
        assert!((noise_variance(2.0, &cam) - 0.0164840).abs() < 1e-7);
        assert!((noise_variance(1e4, &cam) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn measurement_determinism_and_limit() {
        let (mesh, world) = tank();
        let truth = GroundTruthField::from_values((0..mesh.len()).map(|i| i as f64 * 0.01).collect());
        let vp = Viewpoint::new(Vec3::new(10.0, 0.0, 10.0), PI);
        let cam = CameraModel::standard();
        let a = simulate_measurement(&vp, &truth, &cam, mesh, world, 42).unwrap();
        let b = simulate_measurement(&vp, &truth, &cam, mesh, world, 42).unwrap();
        assert_eq!(a, b);
        let quiet = CameraModel {
            noise_a: 1e-30,
            ..cam
        };
        let c = simulate_measurement(&vp, &truth, &quiet, mesh, world, 7).unwrap();
        for (i, y) in c.facet_indices.iter().zip(&c.values) {
            assert!((y - truth.value(*i)).abs() < 1e-12);
        }
        let away = Viewpoint::new(Vec3::new(40.0, 0.0, 10.0), PI);
        assert!(simulate_measurement(&away, &truth, &cam, mesh, world, 1).is_none());
    }

    #[test]
    fn monte_carlo_noise_variance() {
        let (mesh, world) = plate();
        let cam = level_cam();
        let truth = GroundTruthField::from_values(vec![0.0; mesh.len()]);
        let vp = Viewpoint::new(Vec3::new(5.0, 0.0, 0.0), PI);
        let mut samples = Vec::new();
        let mut expect = 0.0;
        for s in 0..5000u64 {
            let obs = simulate_measurement(&vp, &truth, &cam, &mesh, &world, s).unwrap();
            samples.extend(&obs.values);
            expect = obs.noise_vars[0];
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(n >= 1e4);
        assert!((var / expect - 1.0).abs() < 0.05, "var {var} vs {expect}");
    }

    #[test]
    fn yaw_candidates_layout() {
        let c = yaw_candidates(16);
        assert_eq!(c.len(), 16);
        assert_eq!(*c.last().unwrap(), PI);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(c[7], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn yaw_library_single_target() {
        let (mesh, world) = plate();
        let cam = CameraModel {
            fov_h: 20.0,
            ..level_cam()
        };
        // plate faces +x, camera at +x looking back along −x: yaw π
        let lib = build_yaw_library(&[Vec3::new(5.0, 0.0, 0.0)], &cam, &mesh, &world, 16).unwrap();
        assert_relative_eq!(lib[0], PI, epsilon = 1e-12);
        assert!(build_yaw_library(&[Vec3::zeros()], &cam, &mesh, &world, 3).is_err());
    }

    #[test]
    fn yaw_library_tie_break() {
        // with a 60° field of view three bins around π see both front facets
        let (mesh, world) = plate();
        let cam = level_cam();
        let p = Vec3::new(5.0, 0.0, 0.0);
        let counts: Vec<usize> = yaw_candidates(16)
            .into_iter()
            .map(|y| visible_facets(&Viewpoint::new(p, y), &cam, &mesh, &world).len())
            .collect();
        assert_eq!(counts.iter().filter(|&&c| c == 2).count(), 3);
        let lib = build_yaw_library(&[p, p], &cam, &mesh, &world, 16).unwrap();
        assert_relative_eq!(lib[0], -PI + 2.0 * PI / 16.0, epsilon = 1e-12);
        assert_eq!(lib[0], lib[1]);
    }

    #[test]
    fn cylinder_library_is_exhaustive_best() {
        let (mesh, world) = tank();
        let cam = CameraModel::standard();
        let positions: Vec<Vec3> = (0..6)
            .map(|k| {
                let a = k as f64;
                Vec3::new(9.5 * a.cos(), 9.5 * a.sin(), 3.0 + 3.0 * a)
            })
            .collect();
        let lib = build_yaw_library(&positions, &cam, mesh, world, 16).unwrap();
        for (p, &y) in positions.iter().zip(&lib) {
            let chosen = visible_facets(&Viewpoint::new(*p, y), &cam, mesh, world).len();
            for c in yaw_candidates(16) {
                assert!(chosen >= visible_facets(&Viewpoint::new(*p, c), &cam, mesh, world).len());
            }
        }
    }

    #[test]
    fn occlusion_hides_far_side() {
        let (mesh, world) = tank();
        let cam = CameraModel {
            d_max: 30.0,
            alpha_max: 89.0,
            fov_h: 170.0,
            fov_v: 170.0,
            occlusion_check: true,
            ..CameraModel::standard()
        };
        // looking across the tank: far-wall facets face the camera but are hidden
        let vp = Viewpoint::new(Vec3::new(9.0, 0.0, 10.0), PI);
        let open = CameraModel {
            occlusion_check: false,
            ..cam
        };
        let with = visible_facets(&vp, &cam, mesh, world);
        let without = visible_facets(&vp, &open, mesh, world);
        assert!(with.iter().all(|i| without.contains(i)));
        assert!(with.iter().all(|&i| mesh.centers()[i].x > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn monotone_in_capability(ang in -3.1f64..3.1, z in 0.0f64..24.0, r in 7.0f64..13.0, yaw in -3.1f64..3.1,
                                  dfov in 0.0f64..40.0, dalpha in 0.0f64..15.0, dr in 0.0f64..3.0) {
            let (mesh, world) = tank();
            let cam = CameraModel::standard();
            let big = CameraModel {
                fov_h: cam.fov_h + dfov,
                fov_v: cam.fov_v + dfov,
                alpha_max: cam.alpha_max + dalpha,
                d_min: cam.d_min - dr / 2.0,
                d_max: cam.d_max + dr,
                ..cam
            };
            let vp = Viewpoint::new(Vec3::new(r * ang.cos(), r * ang.sin(), z), yaw);
            let small = visible_facets(&vp, &cam, mesh, world);
            let large = visible_facets(&vp, &big, mesh, world);
            prop_assert!(small.iter().all(|i| large.contains(i)));
            prop_assert_eq!(small, brute_visible(&vp, &cam, mesh));
        }

        #[test]
        fn noise_increasing_and_bounded(d1 in 0.0f64..50.0, d2 in 0.0f64..50.0) {
            let cam = CameraModel::standard();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(noise_variance(lo, &cam) < noise_variance(hi, &cam));
            prop_assert!(noise_variance(hi, &cam) <= cam.noise_a);
        }
    }
}
