//! Explicit Gaussian primitives carrying spherical-harmonic channel functions.

mod gaussian;
mod init;
mod knn;

pub use crate::oracle::SceneMeta;
pub use gaussian::{
    covariance, sigmoid, GaussianPrimitive, ParamGroup, RrfModel, CHANNEL_LAYOUT, OFF_LOG_SCALE,
    OFF_OPACITY, OFF_POSITION, OFF_ROTATION, OFF_SH,
};
pub use init::{init_model, logit};
pub use knn::mean_knn_distance;
