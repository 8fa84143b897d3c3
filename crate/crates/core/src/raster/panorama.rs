use std::f64::consts::FRAC_PI_2;

use super::render::{resolve, resolve_backward, Frame, NUM_CARRIERS};
use super::{backward_view, PinholeCamera, RenderSettings, ViewGradient, TILE_SIZE};
use crate::error::{Error, Result};
use crate::model::RrfModel;
use crate::spectrum::{equirect_direction, ChannelImage, Projection, RadioSpatialSpectrum};
use crate::{Mat3, RxPose, Vec3};

/// Local-from-camera rotations of the six cube faces, in the order
/// +x, -x, +y, -y, +z, -z of the receiver's local frame.
fn face_rotations() -> [Mat3; 6] {
    let m = |x: [f64; 3], y: [f64; 3], z: [f64; 3]| {
        Mat3::from_columns(&[Vec3::from(x), Vec3::from(y), Vec3::from(z)])
    };
    [
        m([0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]),
        m([0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]),
        m([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
        m([-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]),
        m([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        m([0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
    ]
}

/// The six 90-degree cameras covering the sphere around `pose`.
pub fn cube_face_cameras(pose: &RxPose, face_res: usize) -> Vec<PinholeCamera> {
    face_rotations()
        .iter()
        .map(|r| PinholeCamera::with_local_rotation(pose, r, FRAC_PI_2, face_res))
        .collect()
}

/// Bilinear lookup table from equirectangular pixels to cube-face pixels.
#[derive(Clone, Debug)]
pub struct PanoramaMap {
    pub height: usize,
    pub width: usize,
    pub face_res: usize,
    /// Per output pixel, four `(face * F * F + row * F + col, weight)` taps.
    taps: Vec<[(u32, f64); 4]>,
}

impl PanoramaMap {
    /// Map for an `height x 2 height` panorama. Faces get `ceil(height / 2)`
    /// pixels rounded up to whole tiles. A face pixel then spans `4 / height`
    /// radians at the face centre, about 1.27 panorama pitches, and under
    /// one pitch near the face edges.
    pub fn new(height: usize) -> Result<Self> {
        if height == 0 || height % TILE_SIZE != 0 {
            return Err(Error::InvalidArgument(format!(
                "panorama height must be a positive multiple of {TILE_SIZE}, got {height}"
            )));
        }
        let width = 2 * height;
        let face_res = height.div_ceil(2).div_ceil(TILE_SIZE) * TILE_SIZE;
        let rots = face_rotations();
        let f = 0.5 * face_res as f64;
        let fr = face_res;
        let mut taps = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                let d = equirect_direction(row as f64, col as f64, height, width);
                let face = (0..6)
                    .max_by(|&a, &b| rots[a].column(2).dot(&d).total_cmp(&rots[b].column(2).dot(&d)))
                    .expect("six faces");
                let c = rots[face].transpose() * d;
                let u = (f * c.x / c.z + f - 0.5).clamp(0.0, (fr - 1) as f64);
                let v = (f * c.y / c.z + f - 0.5).clamp(0.0, (fr - 1) as f64);
                let (u0, v0) = ((u.floor() as usize).min(fr - 2), (v.floor() as usize).min(fr - 2));
                let (fu, fv) = (u - u0 as f64, v - v0 as f64);
                let base = face * fr * fr;
                let idx = |r: usize, q: usize| (base + r * fr + q) as u32;
                taps.push([
                    (idx(v0, u0), (1.0 - fu) * (1.0 - fv)),
                    (idx(v0, u0 + 1), fu * (1.0 - fv)),
                    (idx(v0 + 1, u0), (1.0 - fu) * fv),
                    (idx(v0 + 1, u0 + 1), fu * fv),
                ]);
            }
        }
        Ok(Self {
            height,
            width,
            face_res,
            taps,
        })
    }

    fn gather(&self, faces: &[ChannelImage]) -> ChannelImage {
        let n_face = self.face_res * self.face_res;
        let n = self.height * self.width;
        let mut out = ChannelImage::zeros(self.height, self.width, NUM_CARRIERS);
        for c in 0..NUM_CARRIERS {
            let plane = &mut out.data[c * n..(c + 1) * n];
            for (o, taps) in plane.iter_mut().zip(&self.taps) {
                *o = taps
                    .iter()
                    .map(|&(i, w)| {
                        let i = i as usize;
                        w * faces[i / n_face].plane(c)[i % n_face]
                    })
                    .sum();
            }
        }
        out
    }

    fn scatter(&self, d_out: &ChannelImage) -> Vec<ChannelImage> {
        let n_face = self.face_res * self.face_res;
        let n = self.height * self.width;
        let mut faces = vec![ChannelImage::zeros(self.face_res, self.face_res, NUM_CARRIERS); 6];
        for c in 0..NUM_CARRIERS {
            for (p, taps) in self.taps.iter().enumerate() {
                let g = d_out.data[c * n + p];
                if g == 0.0 {
                    continue;
                }
                for &(i, w) in taps {
                    let i = i as usize;
                    faces[i / n_face].plane_mut(c)[i % n_face] += w * g;
                }
            }
        }
        faces
    }
}

/// A rendered panorama with the intermediates needed for its backward pass.
#[derive(Clone, Debug)]
pub struct PanoramaRender {
    pub frames: Vec<Frame>,
    /// Equirectangular carriers.
    pub carriers: ChannelImage,
    /// Resolved `[visual, gain, tof]` image.
    pub image: ChannelImage,
}

/// Renders an equirectangular panorama at `pose` via six cube faces.
pub fn render_panorama_image(
    model: &RrfModel,
    pose: &RxPose,
    map: &PanoramaMap,
    settings: &RenderSettings,
) -> PanoramaRender {
    let frames: Vec<Frame> = cube_face_cameras(pose, map.face_res)
        .iter()
        .map(|cam| Frame::prepare(model, cam, settings))
        .collect();
    let faces: Vec<ChannelImage> = frames.iter().map(|f| f.render_carriers(settings)).collect();
    let carriers = map.gather(&faces);
    let image = resolve(&carriers, settings.tof_eps);
    PanoramaRender { frames, carriers, image }
}

/// Backpropagates a gradient on the resolved panorama into `out`.
pub fn panorama_backward(
    model: &RrfModel,
    render: &PanoramaRender,
    d_image: &ChannelImage,
    map: &PanoramaMap,
    settings: &RenderSettings,
    out: &mut ViewGradient,
) -> Result<()> {
    let d_carriers = resolve_backward(&render.carriers, d_image, settings.tof_eps);
    let d_faces = map.scatter(&d_carriers);
    for (frame, d) in render.frames.iter().zip(&d_faces) {
        backward_view(model, frame, d, settings, out)?;
    }
    Ok(())
}

/// Renders a `height x 2 height` equirectangular spectrum with default settings.
pub fn render_panorama(model: &RrfModel, pose: &RxPose, height: usize) -> Result<RadioSpatialSpectrum> {
    let map = PanoramaMap::new(height)?;
    let r = render_panorama_image(model, pose, &map, &RenderSettings::default());
    Ok(RadioSpatialSpectrum::from_image(&r.image, *pose, Projection::Equirect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn faces_are_proper_rotations() {
        for r in face_rotations() {
            assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r * r.transpose(), Mat3::identity(), epsilon = 1e-12);
        }
        assert_eq!(face_rotations()[0], crate::raster::camera::local_from_camera());
    }

    #[test]
    fn map_weights_are_partitions() {
        let map = PanoramaMap::new(32).unwrap();
        assert_eq!(map.face_res, 16);
        for taps in &map.taps {
            let s: f64 = taps.iter().map(|t| t.1).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            assert!(taps.iter().all(|t| t.1 >= 0.0));
        }
        assert!(PanoramaMap::new(40).is_err());
        assert!(PanoramaMap::new(0).is_err());
    }

    #[test]
    fn scatter_is_gather_transpose() {
        let map = PanoramaMap::new(16).unwrap();
        let fr = map.face_res;
        let faces: Vec<ChannelImage> = (0..6)
            .map(|f| {
                let mut im = ChannelImage::zeros(fr, fr, NUM_CARRIERS);
                for (i, v) in im.data.iter_mut().enumerate() {
                    *v = ((i * 7 + f * 13) % 11) as f64 * 0.1;
                }
                im
            })
            .collect();
        let mut y = ChannelImage::zeros(16, 32, NUM_CARRIERS);
        for (i, v) in y.data.iter_mut().enumerate() {
            *v = ((i * 5) % 9) as f64 - 4.0;
        }
        let lhs: f64 = map.gather(&faces).data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let back = map.scatter(&y);
        let rhs: f64 = faces
            .iter()
            .zip(&back)
            .map(|(a, b)| a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
    }
}
