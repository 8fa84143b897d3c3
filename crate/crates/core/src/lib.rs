//! Radio radiance fields built from explicit Gaussian primitives.
//!
//! The crate is organized around the data flow of a reconstruction:
//!
//! * [`oracle`] traces specular multipath in a faceted scene and splats the
//!   paths into equirectangular radio spatial spectra (the ground truth).
//! * [`model`] holds the Gaussian primitives and their spherical-harmonic
//!   channel functions.
//! * [`raster`] renders pinhole views and panoramas with tile-based,
//!   depth-sorted alpha compositing, and provides the matching adjoint.
//! * [`train`] fits a model to visual views (geometry) and then to radio
//!   spectra (channel functions and density).
//! * [`csi`] turns rendered spectra into multipath components, steering
//!   vectors and beamforming reports.
//! * [`dataset`], [`eval`] and [`gradcheck`] support the command line tool.
//!
//! Data-parallel loops (tiles, poses) run on rayon when the `parallel`
//! feature is enabled and fall back to plain iterators otherwise.

pub mod csi;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod oracle;
mod par;
pub mod pose;
pub mod raster;
pub mod sh;
pub mod spectrum;
pub mod train;

pub use error::{Error, Result};
pub use par::{set_threads, threads};
pub use model::{GaussianPrimitive, RrfModel, SceneMeta};
pub use oracle::{Facet, MultipathComponent, Scene};
pub use pose::RxPose;
pub use spectrum::{ChannelImage, Projection, RadioSpatialSpectrum};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of channels carried by every primitive and spectrum.
pub const NUM_CHANNELS: usize = 3;

/// Channel index of the visual (albedo) channel.
pub const CH_VISUAL: usize = 0;
/// Channel index of the normalized radio gain channel.
pub const CH_GAIN: usize = 1;
/// Channel index of the normalized time-of-flight channel.
pub const CH_TOF: usize = 2;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
