//! Tile-based Gaussian rasterization of radio spatial spectra.
//!
//! Rendering happens in three steps: every primitive is projected to a 2D
//! splat ([`project`]), splats are binned into 16x16 pixel tiles in depth
//! order ([`tile_and_sort`]), and each pixel composites its tile's splats
//! front to back ([`blend_pixel`]) until the transmittance falls below
//! `t_stop`. Panoramas are assembled from six cube faces.
//!
//! Blending operates on premultiplied carriers `[visual, gain, gain * tof]`;
//! the ToF output is resolved afterwards as the gain-weighted ratio, which
//! matches how the oracle merges paths landing in one pixel.

mod backward;
mod blend;
mod camera;
mod panorama;
mod project;
mod render;
mod tiles;

pub use backward::{backward_view, project_backward, ProjectedGrad, ViewGradient};
pub use blend::{blend_pixel, BlendResult};
pub use camera::PinholeCamera;
pub use panorama::{
    cube_face_cameras, panorama_backward, render_panorama, render_panorama_image, PanoramaMap,
    PanoramaRender,
};
pub use project::{channel_values, project, ChannelValues, ProjectedGaussian};
pub use render::{
    render_view, render_view_image, resolve, resolve_backward, Frame, NUM_CARRIERS,
};
pub use tiles::{tile_and_sort, TileGrid, TILE_SIZE};

/// Numerical constants of the compositing pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    /// Per-splat contributions below this are skipped.
    pub alpha_min: f64,
    /// Per-splat contributions are clamped to this.
    pub alpha_max: f64,
    /// A pixel stops compositing once its transmittance drops below this.
    pub t_stop: f64,
    /// Added to the diagonal of every projected covariance, px^2.
    pub aa_floor: f64,
    /// Regularizer of the gain-weighted ToF ratio.
    pub tof_eps: f64,
    /// Splats whose centre leaves `limit * tan(fov / 2)` are culled.
    pub frustum_guard: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            alpha_min: 1.0 / 255.0,
            alpha_max: 0.999,
            t_stop: 1e-4,
            aa_floor: 0.3,
            tof_eps: 1e-6,
            frustum_guard: 1.3,
        }
    }
}

/// Mahalanobis radius (squared) of the splat footprint: 3 sigma.
pub const FOOTPRINT_Q: f64 = 9.0;
