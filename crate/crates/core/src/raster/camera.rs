use crate::pose::{matrix_to_quat, quat_to_matrix};
use crate::{Mat3, RxPose, Vec3};

/// Square pinhole camera. The camera frame is x right, y down, z forward;
/// `pose.orientation` is world-from-camera.
#[derive(Clone, Debug, PartialEq)]
pub struct PinholeCamera {
    pub pose: RxPose,
    /// Full field of view, radians.
    pub fov: f64,
    /// Image is `resolution x resolution` pixels.
    pub resolution: usize,
    pub near: f64,
    pub far: f64,
    world_to_cam: Mat3,
    focal: f64,
}

/// Rotation taking the camera frame (x right, y down, z forward) to a
/// receiver's local frame (x forward, y left, z up).
pub(crate) fn local_from_camera() -> Mat3 {
    Mat3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

impl PinholeCamera {
    pub fn new(pose: RxPose, fov: f64, resolution: usize, near: f64, far: f64) -> Self {
        assert!(fov > 0.0 && fov < std::f64::consts::PI, "fov must be in (0, pi)");
        assert!(near > 0.0 && far > near, "need 0 < near < far");
        assert!(resolution > 0);
        let world_to_cam = quat_to_matrix(pose.orientation).transpose();
        let focal = 0.5 * resolution as f64 / (0.5 * fov).tan();
        Self {
            pose,
            fov,
            resolution,
            near,
            far,
            world_to_cam,
            focal,
        }
    }

    /// Camera looking along a receiver pose's forward (local +x) axis.
    pub fn along_pose(pose: &RxPose, fov: f64, resolution: usize) -> Self {
        Self::with_local_rotation(pose, &local_from_camera(), fov, resolution)
    }

    /// Camera whose orientation is `pose * local_from_cam`.
    pub fn with_local_rotation(pose: &RxPose, local_from_cam: &Mat3, fov: f64, resolution: usize) -> Self {
        let world = pose.rotation() * local_from_cam;
        let cam_pose = RxPose::new(pose.position(), matrix_to_quat(&world));
        Self::new(cam_pose, fov, resolution, 0.01, 1000.0)
    }

    /// Same camera with a different image size.
    pub fn with_resolution(&self, resolution: usize) -> Self {
        Self::new(self.pose, self.fov, resolution, self.near, self.far)
    }

    pub fn position(&self) -> Vec3 {
        self.pose.position()
    }

    pub fn world_to_cam(&self) -> &Mat3 {
        &self.world_to_cam
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal_point(&self) -> (f64, f64) {
        let c = 0.5 * self.resolution as f64;
        (c, c)
    }

    /// Unit world-space direction through the continuous image point (u, v).
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let (cx, cy) = self.principal_point();
        let d = Vec3::new((u - cx) / self.focal, (v - cy) / self.focal, 1.0);
        (self.world_to_cam.transpose() * d).normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn along_pose_looks_forward() {
        let pose = RxPose::from_yaw(Vec3::new(1.0, 2.0, 0.5), 0.7);
        let cam = PinholeCamera::along_pose(&pose, 1.0, 32);
        let fwd = cam.pixel_ray(16.0, 16.0);
        assert_abs_diff_eq!(fwd, pose.rotation() * Vec3::x(), epsilon = 1e-12);
        // image "down" is world down for a level pose
        let down = cam.pixel_ray(16.0, 31.0) - fwd;
        assert!(down.z < 0.0);
    }
}
