//! Closed-form stepping: feet alternate between world-fixed plants and
//! swings with a designed lift profile, legs solved by two-bone geometry
//! with the ankle joint counter-rotated so the foot stays level.
//!
//! The lift profile is built so the contact threshold rule (height < 0.08 m
//! AND speed < 0.2 m/s at 30 fps) reproduces the plant/swing phases exactly:
//! swing frames are either high or fast, the landing approach is low and
//! slow, and plants are static.

use crate::motion::{matrix_to_rot6d, Skeleton};

/// Ankle height while planted, meters.
pub const ANKLE_PLANT_HEIGHT: f64 = 0.06;
/// Safety margin kept below full leg extension.
const EXTENSION_MARGIN: f64 = 0.005;

/// Leg geometry pulled out of a skeleton.
#[derive(Debug, Clone, Copy)]
pub struct LegGeometry {
    pub hip_offset_left: [f64; 3],
    pub hip_offset_right: [f64; 3],
    pub thigh: f64,
    pub shank: f64,
}

impl LegGeometry {
    pub fn from_skeleton(skeleton: &Skeleton) -> Self {
        let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        LegGeometry {
            hip_offset_left: skeleton.offset(1),
            hip_offset_right: skeleton.offset(2),
            thigh: norm(skeleton.offset(4)),
            shank: norm(skeleton.offset(7)),
        }
    }

    pub fn reach(&self) -> f64 {
        self.thigh + self.shank - EXTENSION_MARGIN
    }

    /// Root height such that a planted leg directly below the hip is within
    /// reach even when the hip is `max_horizontal` away from the plant.
    pub fn root_height(&self, max_horizontal: f64) -> Option<f64> {
        let reach = self.reach();
        if max_horizontal >= reach {
            return None;
        }
        let drop = (reach * reach - max_horizontal * max_horizontal).sqrt();
        Some(ANKLE_PLANT_HEIGHT + drop - self.hip_offset_left[1])
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Rodrigues rotation about a unit axis.
fn axis_angle(axis: [f64; 3], angle: f64) -> [f64; 9] {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let (x, y, z) = (axis[0], axis[1], axis[2]);
    [
        t * x * x + c,
        t * x * y - s * z,
        t * x * z + s * y,
        t * x * y + s * z,
        t * y * y + c,
        t * y * z - s * x,
        t * x * z - s * y,
        t * y * z + s * x,
        t * z * z + c,
    ]
}

/// Minimal rotation mapping unit vector `from` onto unit vector `to`.
fn rotation_between(from: [f64; 3], to: [f64; 3]) -> [f64; 9] {
    let axis = cross(from, to);
    let s = norm(axis);
    let c = dot(from, to).clamp(-1.0, 1.0);
    if s < 1e-12 {
        if c > 0.0 {
            return [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        }
        // antiparallel: rotate half a turn about any perpendicular axis
        let perp = if from[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let axis = cross(from, perp);
        let axis = scale(axis, 1.0 / norm(axis));
        return axis_angle(axis, std::f64::consts::PI);
    }
    axis_angle(scale(axis, 1.0 / s), c.acos())
}

fn transpose(m: &[f64; 9]) -> [f64; 9] {
    [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]]
}

fn mat_mul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[i * 3 + j] = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
        }
    }
    c
}

/// Local hip, knee and ankle rotations (6D) placing the ankle at a world
/// target with a level foot. The knee bends toward `forward`. Returns
/// `None` when the target is out of reach.
pub fn solve_leg(
    geometry: &LegGeometry,
    hip_world: [f64; 3],
    ankle_target: [f64; 3],
    forward: [f64; 3],
) -> Option<([f64; 6], [f64; 6], [f64; 6])> {
    let rest_dir = [0.0, -1.0, 0.0];
    let v = sub(ankle_target, hip_world);
    let len = norm(v);
    let (a, b) = (geometry.thigh, geometry.shank);
    if len > a + b || len < (a - b).abs() + 1e-6 || len < 1e-9 {
        return None;
    }
    let dir = scale(v, 1.0 / len);
    // hip interior angle from the law of cosines
    let cos_hip = ((a * a + len * len - b * b) / (2.0 * a * len)).clamp(-1.0, 1.0);
    let hip_angle = cos_hip.acos();
    // bend the knee toward `forward`: rotate `dir` by hip_angle about the
    // axis perpendicular to both
    let mut axis = cross(dir, forward);
    let axis_len = norm(axis);
    if axis_len < 1e-9 {
        axis = [1.0, 0.0, 0.0];
    } else {
        axis = scale(axis, 1.0 / axis_len);
    }
    let thigh_dir = {
        let r = axis_angle(axis, hip_angle);
        let d = [
            r[0] * dir[0] + r[1] * dir[1] + r[2] * dir[2],
            r[3] * dir[0] + r[4] * dir[1] + r[5] * dir[2],
            r[6] * dir[0] + r[7] * dir[1] + r[8] * dir[2],
        ];
        d
    };
    let knee_world = add(hip_world, scale(thigh_dir, a));
    let shank_vec = sub(ankle_target, knee_world);
    let shank_dir = scale(shank_vec, 1.0 / norm(shank_vec));

    let r_hip_world = rotation_between(rest_dir, thigh_dir);
    let r_shank_world = rotation_between(rest_dir, shank_dir);
    let r_knee_local = mat_mul(&transpose(&r_hip_world), &r_shank_world);
    let r_ankle_local = transpose(&r_shank_world); // level foot: undo the chain

    let hip6 = matrix_to_rot6d(&r_hip_world).ok()?;
    let knee6 = matrix_to_rot6d(&r_knee_local).ok()?;
    let ankle6 = matrix_to_rot6d(&r_ankle_local).ok()?;
    Some((hip6, knee6, ankle6))
}

/// Ankle lift profile for a swing of `frames` frames: fast takeoff, a high
/// plateau, then a slow, low landing approach so the final swing frame sits
/// within the contact speed threshold of the plant.
pub fn lift_profile(frames: usize) -> Vec<f64> {
    assert!(frames >= 4, "swing needs at least 4 frames");
    let mut r = vec![0.0; frames];
    r[0] = 0.10;
    r[frames - 2] = 0.04;
    r[frames - 1] = 0.005;
    let peak = 0.28;
    // rise over the first third, descend toward the fixed landing frames
    let rise_end = (frames / 3).max(1);
    for (k, v) in r.iter_mut().enumerate().take(frames - 2).skip(1) {
        if k <= rise_end {
            let u = k as f64 / rise_end as f64;
            *v = 0.10 + (peak - 0.10) * u;
        } else {
            let span = (frames - 2 - rise_end) as f64;
            let u = (k - rise_end) as f64 / span;
            *v = peak + (0.04 - peak) * u;
        }
    }
    r
}

/// Quintic smoothstep: zero first and second derivatives at both ends, so
/// horizontal foot speed at takeoff and landing stays under the contact
/// threshold.
pub fn smootherstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}
