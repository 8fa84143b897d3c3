use super::{PinholeCamera, RenderSettings, FOOTPRINT_Q};
use crate::model::{covariance, GaussianPrimitive, SceneMeta};
use crate::sh::{basis, num_coeffs};
use crate::{Vec3, CH_GAIN, CH_TOF, CH_VISUAL, NUM_CHANNELS, SPEED_OF_LIGHT};

/// Per-channel values of a primitive as seen from one viewpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelValues {
    /// Clamped values: visual and ToF in [0, 1], gain >= 0.
    pub values: [f64; NUM_CHANNELS],
    /// Bit `c` is set when channel `c` hit its clamp.
    pub clamped: u8,
}

/// Channel values of `g` seen from `eye`.
///
/// Each channel is the SH function evaluated at the unit direction from the
/// primitive to the eye. The ToF channel additionally accumulates the
/// propagation delay over the primitive-to-eye range, so its SH function
/// stores the delay from the transmitter up to the primitive.
pub fn channel_values(g: &GaussianPrimitive, eye: &Vec3, meta: &SceneMeta, sh_degree: usize) -> ChannelValues {
    let v = eye - g.position();
    let range = v.norm();
    let dir = if range > 0.0 { v / range } else { Vec3::z() };
    let b = basis(sh_degree, &dir);
    let k = num_coeffs(sh_degree);
    let raw = |c: usize| -> f64 {
        g.sh[c * k..(c + 1) * k].iter().zip(&b).map(|(x, y)| x * y).sum()
    };
    let vis = raw(CH_VISUAL);
    let gain = raw(CH_GAIN);
    let tof = raw(CH_TOF) + range / (SPEED_OF_LIGHT * meta.tau_max);
    let mut clamped = 0u8;
    let mut clamp = |c: usize, x: f64, hi: f64| -> f64 {
        if x < 0.0 {
            clamped |= 1 << c;
            0.0
        } else if x > hi {
            clamped |= 1 << c;
            hi
        } else {
            x
        }
    };
    let values = [
        clamp(CH_VISUAL, vis, 1.0),
        clamp(CH_GAIN, gain, f64::INFINITY),
        clamp(CH_TOF, tof, 1.0),
    ];
    ChannelValues { values, clamped }
}

/// A primitive after perspective projection onto a camera's image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedGaussian {
    /// Index of the source primitive.
    pub index: usize,
    /// Pixel coordinates of the centre; pixel `(row, col)` has its centre at
    /// `(col + 0.5, row + 0.5)`.
    pub mean2d: [f64; 2],
    /// Screen covariance `[xx, xy, yy]` including the anti-aliasing floor.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, same layout.
    pub conic: [f64; 3],
    /// Camera-frame z of the centre.
    pub depth: f64,
    /// Opacity after the mass-preserving rescale.
    pub alpha: f64,
    pub channel_values: [f64; NUM_CHANNELS],
    pub clamped: u8,
}

impl ProjectedGaussian {
    /// Premultiplied blend carriers `[visual, gain, gain * tof]`.
    #[inline]
    pub fn carriers(&self) -> [f64; 3] {
        let v = self.channel_values;
        [v[CH_VISUAL], v[CH_GAIN], v[CH_GAIN] * v[CH_TOF]]
    }

    /// Half extents of the footprint's axis-aligned bounding box, px.
    pub fn half_extent(&self) -> [f64; 2] {
        let r = FOOTPRINT_Q.sqrt();
        [r * self.cov2d[0].sqrt(), r * self.cov2d[2].sqrt()]
    }

    /// Squared Mahalanobis distance of the continuous point (x, y).
    #[inline]
    pub fn mahalanobis(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean2d[0];
        let dy = y - self.mean2d[1];
        let [a, b, c] = self.conic;
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    }
}

/// Projects one primitive; `None` when it falls outside the view.
pub fn project(
    g: &GaussianPrimitive,
    index: usize,
    cam: &PinholeCamera,
    meta: &SceneMeta,
    sh_degree: usize,
    settings: &RenderSettings,
) -> Option<ProjectedGaussian> {
    let w = cam.world_to_cam();
    let t = w * (g.position() - cam.position());
    let z = t.z;
    if !(z > cam.near && z < cam.far) {
        return None;
    }
    let (tx, ty) = (t.x / z, t.y / z);
    let limit = settings.frustum_guard * (0.5 * cam.fov).tan();
    if tx.abs() > limit || ty.abs() > limit {
        return None;
    }
    let f = cam.focal();
    let (cx, cy) = cam.principal_point();
    let mean2d = [f * tx + cx, f * ty + cy];

    let sigma = covariance(g);
    let j = nalgebra::Matrix2x3::new(f / z, 0.0, -f * t.x / (z * z), 0.0, f / z, -f * t.y / (z * z));
    let tm = j * w;
    let pre = tm * sigma * tm.transpose();
    let det_pre = pre[(0, 0)] * pre[(1, 1)] - pre[(0, 1)] * pre[(1, 0)];
    if !(det_pre > 0.0) {
        return None;
    }
    let a = pre[(0, 0)] + settings.aa_floor;
    let b = 0.5 * (pre[(0, 1)] + pre[(1, 0)]);
    let c = pre[(1, 1)] + settings.aa_floor;
    let det = a * c - b * b;
    let rho = (det_pre / det).sqrt();

    let r = FOOTPRINT_Q.sqrt();
    let (ex, ey) = (r * a.sqrt(), r * c.sqrt());
    let size = cam.resolution as f64;
    if mean2d[0] + ex < 0.0 || mean2d[0] - ex > size || mean2d[1] + ey < 0.0 || mean2d[1] - ey > size {
        return None;
    }

    let cv = channel_values(g, &cam.position(), meta, sh_degree);
    Some(ProjectedGaussian {
        index,
        mean2d,
        cov2d: [a, b, c],
        conic: [c / det, -b / det, a / det],
        depth: z,
        alpha: g.opacity() * rho,
        channel_values: cv.values,
        clamped: cv.clamped,
    })
}
