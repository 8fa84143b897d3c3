use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Receiver pose: position plus world-from-local orientation.
///
/// The local frame is x forward (azimuth 0), y left, z up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RxPose {
    pub position: [f64; 3],
    /// Unit quaternion (w, x, y, z).
    pub orientation: [f64; 4],
}

impl RxPose {
    pub fn new(position: Vec3, orientation: [f64; 4]) -> Self {
        Self {
            position: [position.x, position.y, position.z],
            orientation: normalize_quat(orientation),
        }
    }

    pub fn identity_at(position: Vec3) -> Self {
        Self::new(position, [1.0, 0.0, 0.0, 0.0])
    }

    /// Pose rotated by `yaw` radians about the world z axis.
    pub fn from_yaw(position: Vec3, yaw: f64) -> Self {
        let (s, c) = (0.5 * yaw).sin_cos();
        Self::new(position, [c, 0.0, 0.0, s])
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    /// World-from-local rotation matrix.
    pub fn rotation(&self) -> Mat3 {
        quat_to_matrix(self.orientation)
    }

    /// Rounds every component to the nearest `f32`, the precision used on disk.
    pub fn snapped(&self) -> Self {
        let r = |v: f64| v as f32 as f64;
        Self {
            position: self.position.map(r),
            orientation: self.orientation.map(r),
        }
    }

    pub fn to_f32_array(&self) -> [f32; 7] {
        let p = self.position;
        let q = self.orientation;
        [
            p[0] as f32, p[1] as f32, p[2] as f32, q[0] as f32, q[1] as f32, q[2] as f32,
            q[3] as f32,
        ]
    }

    pub fn from_f32_array(a: [f32; 7]) -> Self {
        Self {
            position: [a[0] as f64, a[1] as f64, a[2] as f64],
            orientation: [a[3] as f64, a[4] as f64, a[5] as f64, a[6] as f64],
        }
    }
}

pub fn normalize_quat(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    q.map(|v| v / n)
}

/// Rotation matrix of a quaternion (w, x, y, z); the input is normalized first.
pub fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = normalize_quat(q);
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Quaternion (w, x, y, z) of a proper rotation matrix.
pub fn matrix_to_quat(m: &Mat3) -> [f64; 4] {
    let r = nalgebra::Rotation3::from_matrix_unchecked(*m);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&r);
    normalize_quat([q.w, q.i, q.j, q.k])
}

/// Hamilton product a * b.
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = a;
    let [bw, bx, by, bz] = b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

/// Azimuth in [-pi, pi] and elevation in [-pi/2, pi/2] of a local-frame direction.
pub fn direction_to_angles(d: &Vec3) -> (f64, f64) {
    let az = d.y.atan2(d.x);
    let el = (d.z / d.norm()).clamp(-1.0, 1.0).asin();
    (az, el)
}

pub fn angles_to_direction(az: f64, el: f64) -> Vec3 {
    let (se, ce) = el.sin_cos();
    let (sa, ca) = az.sin_cos();
    Vec3::new(ce * ca, ce * sa, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn yaw_rotates_forward_axis() {
        let pose = RxPose::from_yaw(Vec3::zeros(), std::f64::consts::FRAC_PI_2);
        let fwd = pose.rotation() * Vec3::x();
        assert_abs_diff_eq!(fwd, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn matrix_quat_round_trip() {
        let q = normalize_quat([0.3, -0.5, 0.2, 0.7]);
        let m = quat_to_matrix(q);
        let back = quat_to_matrix(matrix_to_quat(&m));
        assert_abs_diff_eq!(m, back, epsilon = 1e-12);
    }

    #[test]
    fn angles_round_trip() {
        let d = angles_to_direction(-2.0, 0.4);
        let (az, el) = direction_to_angles(&d);
        assert_abs_diff_eq!(az, -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el, 0.4, epsilon = 1e-14);
    }
}
