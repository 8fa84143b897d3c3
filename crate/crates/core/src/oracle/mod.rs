//! Specular image-method ray tracer that produces ground-truth multipath and
//! splats it into equirectangular radio spatial spectra.

mod scene;
mod splat;
mod trace;

pub use scene::{Aabb, Facet, Scene, SceneMeta};
pub use splat::splat_oracle_spectrum;
pub use trace::{mirror_point, occlusion_test, trace_paths, MultipathComponent, MAX_ORDER};
