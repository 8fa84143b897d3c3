//! Two-stage fitting of a radio radiance field.
//!
//! Stage 1 fits geometry and visual appearance to pinhole images in
//! resolution phases, growing and pruning primitives along the way. Stage 2
//! freezes the geometry and fits the gain and ToF SH functions plus opacity
//! to panoramic radio spectra. Gradients come from a hand-written backward
//! pass through loss, compositing, projection and SH evaluation.

mod adam;
mod config;
mod densify;
mod loss;
mod objective;
mod stages;

pub use adam::{opt_step, OptimState};
pub use config::{DensifyConfig, LearningRates, Phase, TrainConfig};
pub use densify::{densify_and_prune, GradStats};
pub use loss::{loss, loss_and_grad, ssim, GainNorm, LossTerms, LossWeights};
pub use objective::View;
pub use stages::{
    downsample_target, train_stage1, train_stage2, LogRecord, RadioSample, VisualSample, STAGE1_GROUPS,
    STAGE2_GAIN_GROUPS, STAGE2_TOF_GROUPS,
};
