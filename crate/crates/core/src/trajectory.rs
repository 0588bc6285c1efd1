//! Rest-to-rest polynomial trajectories through control waypoints.
//!
//! Each segment follows the straight line between its waypoints with the
//! quintic minimum-jerk profile `s(τ) = 10τ³ − 15τ⁴ + 6τ⁵`, stored as an
//! order-`k` polynomial per axis (coefficients above degree 5 are zero).
//! Position, velocity and acceleration vanish at both ends. Yaw slews at a
//! constant rate along the shortest arc.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::fmt::sig9;
use crate::mesh::Vec3;
use crate::sensor::{angle_diff, normalize_angle, Viewpoint};
use crate::world::dyadic_count;

/// Peak of `s'(τ)`, reached at `τ = 1/2`.
pub const PROFILE_PEAK_VELOCITY: f64 = 1.875;
/// Peak of `|s''(τ)|`, `10/√3`.
pub const PROFILE_PEAK_ACCEL: f64 = 5.773_502_691_896_258;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLimits {
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_max: f64,
    /// rad/s
    pub yaw_rate_max: f64,
    /// Vehicle radius used for clearance checks, m.
    pub radius: f64,
}

impl DynamicsLimits {
    /// 4 m/s, 3 m/s², 90°/s, 0.6 m.
    pub fn standard() -> Self {
        Self {
            v_max: 4.0,
            a_max: 3.0,
            yaw_rate_max: std::f64::consts::FRAC_PI_2,
            radius: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("yaw_rate_max", self.yaw_rate_max),
            ("radius", self.radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IppError::param(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Minimum time for a straight-line rest-to-rest move under a trapezoidal
/// (or triangular) velocity profile, or for the yaw slew, whichever is longer.
pub fn segment_time(from: &Viewpoint, to: &Viewpoint, lim: &DynamicsLimits) -> f64 {
    let dist = (to.position - from.position).norm();
    let ramp = lim.v_max * lim.v_max / lim.a_max;
    let translate = if dist >= ramp {
        dist / lim.v_max + lim.v_max / lim.a_max
    } else {
        2.0 * (dist / lim.a_max).sqrt()
    };
    let yaw = angle_diff(to.yaw, from.yaw).abs() / lim.yaw_rate_max;
    translate.max(yaw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: Viewpoint,
    pub end: Viewpoint,
    /// Global start time, s.
    pub t0: f64,
    pub duration: f64,
    /// Monomial coefficients in local time per axis, lowest degree first.
    pub coeffs: [Vec<f64>; 3],
    yaw_delta: f64,
}

impl Segment {
    fn new(start: Viewpoint, end: Viewpoint, t0: f64, duration: f64, order: usize) -> Self {
        let delta = end.position - start.position;
        let coeffs = [0, 1, 2].map(|k| {
            let mut c = vec![0.0; order + 1];
            c[0] = start.position[k];
            c[3] = 10.0 * delta[k] / duration.powi(3);
            c[4] = -15.0 * delta[k] / duration.powi(4);
            c[5] = 6.0 * delta[k] / duration.powi(5);
            c
        });
        Self {
            start,
            end,
            t0,
            duration,
            coeffs,
            yaw_delta: angle_diff(end.yaw, start.yaw),
        }
    }

    fn length(&self) -> f64 {
        (self.end.position - self.start.position).norm()
    }

    /// Profile value and its first two derivatives w.r.t. local time.
    fn profile(&self, local: f64) -> (f64, f64, f64) {
        let t = self.duration;
        let tau = (local / t).clamp(0.0, 1.0);
        let s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
        let ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / t;
        let dds = (60.0 * tau - 180.0 * tau * tau + 120.0 * tau * tau * tau) / (t * t);
        (s, ds, dds)
    }

    pub fn position(&self, local: f64) -> Vec3 {
        let (s, _, _) = self.profile(local);
        self.start.position + (self.end.position - self.start.position) * s
    }

    /// Horner evaluation of the stored monomial coefficients.
    pub fn position_from_coeffs(&self, local: f64) -> Vec3 {
        let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &a| acc * local + a);
        Vec3::new(eval(&self.coeffs[0]), eval(&self.coeffs[1]), eval(&self.coeffs[2]))
    }

    pub fn velocity(&self, local: f64) -> Vec3 {
        let (_, ds, _) = self.profile(local);
        (self.end.position - self.start.position) * ds
    }

    pub fn acceleration(&self, local: f64) -> Vec3 {
        let (_, _, dds) = self.profile(local);
        (self.end.position - self.start.position) * dds
    }

    pub fn yaw(&self, local: f64) -> f64 {
        let tau = (local / self.duration).clamp(0.0, 1.0);
        normalize_angle(self.start.yaw + self.yaw_delta * tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
    waypoints: Vec<Viewpoint>,
    total_time: f64,
}

/// Fit rest-to-rest segments through `waypoints`. Each duration is the
/// larger of `safety × segment_time` and the shortest time at which the
/// quintic profile respects `v_max` and `a_max`. Coincident waypoints with
/// equal yaw produce no segment.
pub fn plan_polynomial(waypoints: &[Viewpoint], lim: &DynamicsLimits, order: usize, safety: f64) -> Result<Trajectory> {
    if waypoints.len() < 2 {
        return Err(IppError::param("waypoints", format!("need at least 2, got {}", waypoints.len())));
    }
    if order < 5 {
        return Err(IppError::param("poly_order", format!("must be ≥ 5, got {order}")));
    }
    let mut segments = Vec::with_capacity(waypoints.len() - 1);
    let mut t0 = 0.0;
    for pair in waypoints.windows(2) {
        let base = segment_time(&pair[0], &pair[1], lim);
        if base == 0.0 {
            continue;
        }
        let dist = (pair[1].position - pair[0].position).norm();
        let duration = (safety * base)
            .max(PROFILE_PEAK_VELOCITY * dist / lim.v_max)
            .max((PROFILE_PEAK_ACCEL * dist / lim.a_max).sqrt());
        segments.push(Segment::new(pair[0], pair[1], t0, duration, order));
        t0 += duration;
    }
    Ok(Trajectory {
        segments,
        waypoints: waypoints.to_vec(),
        total_time: t0,
    })
}

impl Trajectory {
    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn waypoints(&self) -> &[Viewpoint] {
        &self.waypoints
    }

    fn locate(&self, t: f64) -> Option<(&Segment, f64)> {
        if self.segments.is_empty() || t <= 0.0 || t >= self.total_time {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t0 <= t).saturating_sub(1);
        let seg = &self.segments[idx];
        Some((seg, t - seg.t0))
    }

    pub fn viewpoint(&self, t: f64) -> Viewpoint {
        match self.locate(t) {
            Some((seg, local)) => Viewpoint {
                position: seg.position(local),
                yaw: seg.yaw(local),
            },
            None if t <= 0.0 => self.waypoints[0],
            None => *self.waypoints.last().expect("non-empty"),
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.viewpoint(t).position
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        self.locate(t).map_or(Vec3::zeros(), |(s, l)| s.velocity(l))
    }

    pub fn acceleration(&self, t: f64) -> Vec3 {
        self.locate(t).map_or(Vec3::zeros(), |(s, l)| s.acceleration(l))
    }

    /// Positions along the path with consecutive spacing ≤ `step`. Each
    /// segment uses a power-of-two sample count, so halving `step` yields a
    /// superset of the samples.
    pub fn sample_positions(&self, step: f64) -> Vec<Vec3> {
        self.sample_positions_until(step, f64::INFINITY)
    }

    /// Like [`Self::sample_positions`] but stops at time `t_end`.
    pub fn sample_positions_until(&self, step: f64, t_end: f64) -> Vec<Vec3> {
        assert!(step > 0.0, "sample step must be positive");
        let mut out = vec![self.waypoints[0].position];
        for seg in &self.segments {
            if seg.t0 > t_end {
                break;
            }
            // arc-length spacing ≤ peak speed · Δt = 1.875·D / n
            let n = dyadic_count(PROFILE_PEAK_VELOCITY * seg.length() / step);
            for i in 1..=n {
                let local = seg.duration * i as f64 / n as f64;
                if seg.t0 + local > t_end {
                    out.push(seg.position(t_end - seg.t0));
                    return out;
                }
                out.push(seg.position(local));
            }
        }
        out
    }

    /// CSV rows `t,x,y,z,yaw` at `rate` Hz up to `t_end` (inclusive of the end point).
    pub fn to_csv(&self, rate: f64, t_end: f64) -> String {
        let mut out = String::from("t,x,y,z,yaw\n");
        self.append_csv(&mut out, 0.0, rate, t_end);
        out
    }

    pub(crate) fn append_csv(&self, out: &mut String, t_shift: f64, rate: f64, t_end: f64) {
        let end = t_end.min(self.total_time);
        let n = (end * rate).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|j| j as f64 / rate).collect();
        if times.last().is_some_and(|&t| t < end) {
            times.push(end);
        }
        for t in times {
            let v = self.viewpoint(t);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig9(t + t_shift),
                sig9(v.position.x),
                sig9(v.position.y),
                sig9(v.position.z),
                sig9(v.yaw)
            );
        }
    }
}

/// Viewpoints at `t_offset, t_offset + 1/freq, …` up to the trajectory end.
pub fn measurement_viewpoints(traj: &Trajectory, freq: f64, t_offset: f64) -> Vec<(f64, Viewpoint)> {
    assert!(freq > 0.0, "measurement frequency must be positive");
    let mut out = Vec::new();
    let mut j = 0usize;
    loop {
        let t = t_offset + j as f64 / freq;
        if t > traj.total_time() + 1e-9 {
            break;
        }
        if t >= 0.0 {
            out.push((t, traj.viewpoint(t.min(traj.total_time()))));
        }
        j += 1;
    }
    out
}
