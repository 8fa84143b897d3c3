use std::hash::{DefaultHasher, Hash, Hasher};

use super::blend::{composite, resolve_carriers, Splat};
use super::{project, tile_and_sort, PinholeCamera, ProjectedGaussian, RenderSettings, TileGrid};
use crate::model::RrfModel;
use crate::spectrum::{ChannelImage, Projection, RadioSpatialSpectrum};
use crate::{par, NUM_CHANNELS};

/// Number of premultiplied blend accumulators per pixel.
pub const NUM_CARRIERS: usize = 3;

/// Projected and binned splats of one camera view.
#[derive(Clone, Debug)]
pub struct Frame {
    pub camera: PinholeCamera,
    /// Visible splats in primitive-index order.
    pub projected: Vec<ProjectedGaussian>,
    pub grid: TileGrid,
    pub(crate) splats: Vec<Vec<Splat>>,
}

impl Frame {
    /// Projects every primitive and bins the visible ones into tiles.
    pub fn prepare(model: &RrfModel, camera: &PinholeCamera, settings: &RenderSettings) -> Self {
        let projected: Vec<ProjectedGaussian> = par::map_range(model.len(), |i| {
            project(&model.gaussians[i], i, camera, &model.meta, model.sh_degree, settings)
        })
        .into_iter()
        .flatten()
        .collect();
        let grid = tile_and_sort(&projected, camera.resolution, camera.resolution);
        let splats = grid
            .lists
            .iter()
            .map(|list| list.iter().map(|&i| Splat::new(&projected[i as usize], settings)).collect())
            .collect();
        Self {
            camera: camera.clone(),
            projected,
            grid,
            splats,
        }
    }

    /// Composites every pixel into the premultiplied carrier image.
    pub fn render_carriers(&self, settings: &RenderSettings) -> ChannelImage {
        let grid = &self.grid;
        let blocks = par::map_range(grid.num_tiles(), |t| {
            let (x0, x1, y0, y1) = grid.tile_bounds(t);
            let mut block = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for row in y0..y1 {
                for col in x0..x1 {
                    let (acc, _) =
                        composite(&self.splats[t], col as f64 + 0.5, row as f64 + 0.5, settings, |_| {});
                    block.push(acc);
                }
            }
            block
        });
        let mut out = ChannelImage::zeros(grid.height, grid.width, NUM_CARRIERS);
        for (t, block) in blocks.iter().enumerate() {
            let (x0, x1, y0, y1) = grid.tile_bounds(t);
            let mut it = block.iter();
            for row in y0..y1 {
                for col in x0..x1 {
                    let acc = it.next().expect("block size");
                    for (c, v) in acc.iter().enumerate() {
                        out.set(c, row, col, *v);
                    }
                }
            }
        }
        out
    }

    /// Hash of the discrete structure of the render: the visible set, channel
    /// clamps, and for every pixel its contributors, their alpha clamps and
    /// whether compositing stopped early. Two renders with equal signatures
    /// are the same smooth function of the parameters.
    pub fn signature(&self, settings: &RenderSettings) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.projected {
            (p.index, p.clamped).hash(&mut h);
        }
        let grid = &self.grid;
        let per_tile = par::map_range(grid.num_tiles(), |t| {
            let mut th = DefaultHasher::new();
            let (x0, x1, y0, y1) = grid.tile_bounds(t);
            for row in y0..y1 {
                for col in x0..x1 {
                    let (_, tr) =
                        composite(&self.splats[t], col as f64 + 0.5, row as f64 + 0.5, settings, |c| {
                            (grid.lists[t][c.k], c.clamped).hash(&mut th);
                        });
                    (tr < settings.t_stop).hash(&mut th);
                }
            }
            th.finish()
        });
        per_tile.hash(&mut h);
        h.finish()
    }
}

/// Resolves carriers `[visual, gain, gain * tof]` into `[visual, gain, tof]`.
pub fn resolve(carriers: &ChannelImage, tof_eps: f64) -> ChannelImage {
    let mut out = ChannelImage::zeros(carriers.height, carriers.width, NUM_CHANNELS);
    let n = carriers.height * carriers.width;
    for i in 0..n {
        let c = [carriers.data[i], carriers.data[n + i], carriers.data[2 * n + i]];
        let r = resolve_carriers(c, tof_eps);
        for (k, v) in r.iter().enumerate() {
            out.data[k * n + i] = *v;
        }
    }
    out
}

/// Pulls a gradient on resolved channels back onto the carriers.
pub fn resolve_backward(carriers: &ChannelImage, d_resolved: &ChannelImage, tof_eps: f64) -> ChannelImage {
    assert!(carriers.same_shape(d_resolved), "gradient shape mismatch");
    let mut out = ChannelImage::zeros(carriers.height, carriers.width, NUM_CARRIERS);
    let n = carriers.height * carriers.width;
    for i in 0..n {
        let g = carriers.data[n + i] + tof_eps;
        let num = carriers.data[2 * n + i];
        let d = [d_resolved.data[i], d_resolved.data[n + i], d_resolved.data[2 * n + i]];
        out.data[i] = d[0];
        out.data[n + i] = d[1] - d[2] * num / (g * g);
        out.data[2 * n + i] = d[2] / g;
    }
    out
}

/// Renders a pinhole view to a double-precision `[visual, gain, tof]` image.
pub fn render_view_image(model: &RrfModel, camera: &PinholeCamera, settings: &RenderSettings) -> ChannelImage {
    let frame = Frame::prepare(model, camera, settings);
    resolve(&frame.render_carriers(settings), settings.tof_eps)
}

/// Renders a pinhole view with default settings.
pub fn render_view(model: &RrfModel, camera: &PinholeCamera) -> RadioSpatialSpectrum {
    let img = render_view_image(model, camera, &RenderSettings::default());
    RadioSpatialSpectrum::from_image(&img, camera.pose, Projection::pinhole(camera.fov, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{logit, SceneMeta};
    use crate::{RxPose, Vec3};
    use approx::assert_relative_eq;

    fn meta() -> SceneMeta {
        SceneMeta {
            tau_max: 1e-7,
            g_ref: 0.01,
            carrier_freq: 2.4e9,
            tx_position: [0.0; 3],
        }
    }

    fn camera(res: usize) -> PinholeCamera {
        PinholeCamera::along_pose(&RxPose::identity_at(Vec3::zeros()), std::f64::consts::FRAC_PI_2, res)
    }

    #[test]
    fn empty_model_renders_zero() {
        let model = RrfModel::empty(0, meta());
        let img = render_view_image(&model, &camera(32), &RenderSettings::default());
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resolve_roundtrip_gradient() {
        let mut c = ChannelImage::zeros(1, 2, 3);
        c.data = vec![0.2, 0.4, 0.5, 0.0, 0.1, 0.0];
        let r = resolve(&c, 1e-6);
        assert_relative_eq!(r.data[4], 0.2, epsilon = 1e-5);
        assert_eq!(r.data[5], 0.0);
        let mut d = ChannelImage::zeros(1, 2, 3);
        d.data = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let g = resolve_backward(&c, &d, 1e-6);
        let h = 1e-7;
        let mut cp = c.clone();
        cp.data[2] += h;
        let fd = (resolve(&cp, 1e-6).data.iter().sum::<f64>() - r.data.iter().sum::<f64>()) / h;
        assert_relative_eq!(g.data[2], fd, max_relative = 1e-5);
    }

    #[test]
    fn pixels_do_not_depend_on_tiling() {
        // A large splat straddling tile boundaries matches direct blending.
        let mut model = RrfModel::empty(0, meta());
        let g = model.primitive(Vec3::new(2.0, 0.1, -0.05), [-1.5; 3], [1.0, 0.0, 0.0, 0.0], logit(0.7), [0.6, 0.3, 0.1]);
        model.gaussians.push(g);
        let g = model.primitive(Vec3::new(3.0, -0.2, 0.1), [-1.2; 3], [1.0, 0.0, 0.0, 0.0], logit(0.5), [0.2, 0.5, 0.2]);
        model.gaussians.push(g);
        let s = RenderSettings::default();
        let cam = camera(48);
        let frame = Frame::prepare(&model, &cam, &s);
        let carriers = frame.render_carriers(&s);
        let mut sorted = frame.projected.clone();
        sorted.sort_by(|a, b| a.depth.total_cmp(&b.depth));
        for row in (0..48).step_by(5) {
            for col in (0..48).step_by(3) {
                let r = super::super::blend_pixel(&sorted, (row, col), &s);
                for c in 0..3 {
                    assert_relative_eq!(carriers.get(c, row, col), r.carriers[c], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn signature_tracks_structure() {
        let mut model = RrfModel::empty(0, meta());
        let g = model.primitive(Vec3::new(2.0, 0.0, 0.0), [-2.0; 3], [1.0, 0.0, 0.0, 0.0], logit(0.5), [0.5, 0.3, 0.1]);
        model.gaussians.push(g);
        let s = RenderSettings::default();
        let cam = camera(32);
        let a = Frame::prepare(&model, &cam, &s).signature(&s);
        model.gaussians[0].opacity_logit += 1e-9;
        let b = Frame::prepare(&model, &cam, &s).signature(&s);
        assert_eq!(a, b);
        model.gaussians[0].position[1] = 10.0;
        let c = Frame::prepare(&model, &cam, &s).signature(&s);
        assert_ne!(a, c);
    }
}
