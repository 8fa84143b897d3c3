use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{opt_step, OptimState};
use super::config::TrainConfig;
use super::densify::{densify_and_prune, GradStats};
use super::loss::{LossTerms, LossWeights};
use super::objective::View;
use crate::error::{Error, Result};
use crate::model::{ParamGroup, RrfModel};
use crate::raster::{PinholeCamera, RenderSettings, ViewGradient};
use crate::spectrum::ChannelImage;
use crate::{RxPose, CH_GAIN, CH_TOF, NUM_CHANNELS};

/// A pinhole view with its visual target.
#[derive(Clone, Debug)]
pub struct VisualSample {
    pub camera: PinholeCamera,
    pub target: ChannelImage,
}

/// A receiver pose with its equirectangular radio target.
#[derive(Clone, Debug)]
pub struct RadioSample {
    pub pose: RxPose,
    pub target: ChannelImage,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: u8,
    pub phase: usize,
    pub iteration: usize,
    pub loss: LossTerms,
    pub primitives: usize,
    pub wall_time_s: f64,
}

pub const STAGE1_GROUPS: [ParamGroup; 5] = [
    ParamGroup::Position,
    ParamGroup::LogScale,
    ParamGroup::Rotation,
    ParamGroup::Opacity,
    ParamGroup::ShVisual,
];

/// Parameters of the stage-2 gain phase.
pub const STAGE2_GAIN_GROUPS: [ParamGroup; 2] = [ParamGroup::Opacity, ParamGroup::ShGain];

/// Parameters of the stage-2 ToF phase.
pub const STAGE2_TOF_GROUPS: [ParamGroup; 1] = [ParamGroup::ShTof];

/// Box-filter downsampling that keeps the ToF channel gain-weighted.
pub fn downsample_target(image: &ChannelImage, factor: usize) -> ChannelImage {
    if factor <= 1 {
        return image.clone();
    }
    let mut carriers = image.clone();
    let n = image.height * image.width;
    for i in 0..n {
        carriers.data[CH_TOF * n + i] *= image.data[CH_GAIN * n + i];
    }
    let mut out = carriers.downsample(factor);
    let m = out.height * out.width;
    for i in 0..m {
        let g = out.data[CH_GAIN * m + i];
        out.data[CH_TOF * m + i] = if g > 0.0 { out.data[CH_TOF * m + i] / g } else { 0.0 };
    }
    out
}

/// Diagonal of the bounding box of the primitive centres.
fn extent(model: &RrfModel) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for g in &model.gaussians {
        for k in 0..3 {
            lo[k] = lo[k].min(g.position[k]);
            hi[k] = hi[k].max(g.position[k]);
        }
    }
    let d: f64 = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    if d.is_finite() && d > 0.0 {
        d
    } else {
        1.0
    }
}

struct Batch<'a> {
    views: Vec<(View, &'a ChannelImage)>,
}

fn run_batch(
    model: &RrfModel,
    batch: &Batch,
    weights: &LossWeights,
    mask_threshold: f64,
    settings: &RenderSettings,
) -> Result<(LossTerms, ViewGradient)> {
    let mut total = ViewGradient::zeros(model);
    let mut terms = LossTerms::default();
    let w = 1.0 / batch.views.len() as f64;
    for (view, target) in &batch.views {
        let mut g = ViewGradient::zeros(model);
        let t = view.loss_and_gradient(model, target, weights, mask_threshold, settings, &mut g)?;
        total.accumulate(&g, w);
        terms.visual += w * t.visual;
        terms.gain += w * t.gain;
        terms.tof += w * t.tof;
        terms.total += w * t.total;
    }
    Ok((terms, total))
}

/// Stage 1: geometry and visual appearance from pinhole visual targets,
/// coarse to fine, with densification. Radio SH coefficients are untouched.
pub fn train_stage1(
    model: &mut RrfModel,
    views: &[VisualSample],
    config: &TrainConfig,
    log: &mut dyn FnMut(&LogRecord),
) -> Result<()> {
    if views.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let settings = RenderSettings::default();
    let diag = extent(model);
    let mut state = OptimState::new(model, config.lr, diag);
    let mut stats = GradStats::new(model.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = Instant::now();
    let mut global = 0usize;
    let d = &config.densify;
    for (phase_idx, phase) in config.stage1_phases.iter().enumerate() {
        if phase.iterations == 0 {
            continue;
        }
        let factor = TrainConfig::factor(phase.scale);
        let scaled: Vec<(PinholeCamera, ChannelImage)> = views
            .iter()
            .map(|v| {
                let t = downsample_target(&v.target, factor);
                (v.camera.with_resolution(t.width), t)
            })
            .collect();
        for it in 0..phase.iterations {
            let batch = Batch {
                views: (0..config.batch_size)
                    .map(|_| {
                        let (cam, t) = &scaled[rng.gen_range(0..scaled.len())];
                        (View::Pinhole(cam.clone()), t)
                    })
                    .collect(),
            };
            let (terms, grads) = run_batch(model, &batch, &config.visual_weights, config.mask_threshold, &settings)?;
            stats.add(&grads.screen_grad, &grads.visible);
            opt_step(model, &grads.params, &mut state, &STAGE1_GROUPS);
            global += 1;
            if d.interval > 0 && global >= d.start && global <= d.until && global % d.interval == 0 {
                let sources = densify_and_prune(model, &stats, d, diag);
                state.remap(&sources, model.params_per_primitive());
                stats = GradStats::new(model.len());
            }
            if (it + 1) % config.log_interval.max(1) == 0 || it + 1 == phase.iterations {
                log(&LogRecord {
                    stage: 1,
                    phase: phase_idx,
                    iteration: global,
                    loss: terms,
                    primitives: model.len(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok(())
}

/// Stage 2: radio SH and opacity from panoramic radio targets with the
/// geometry and visual appearance frozen.
///
/// Phase 0 fits gain SH and opacity to the gain loss; phase 1 then fits the
/// ToF SH to the masked ToF loss with everything else held.
pub fn train_stage2(
    model: &mut RrfModel,
    spectra: &[RadioSample],
    config: &TrainConfig,
    log: &mut dyn FnMut(&LogRecord),
) -> Result<()> {
    if spectra.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    if config.stage2_iterations + config.stage2_tof_iterations == 0 {
        return Ok(());
    }
    for s in spectra {
        if s.target.channels != NUM_CHANNELS {
            return Err(Error::ShapeMismatch("radio targets need all channels".into()));
        }
    }
    let settings = RenderSettings::default();
    let factor = TrainConfig::factor(config.stage2_scale);
    let targets: Vec<ChannelImage> = spectra.iter().map(|s| downsample_target(&s.target, factor)).collect();
    let height = targets[0].height;
    let map = std::sync::Arc::new(crate::raster::PanoramaMap::new(height)?);
    let mut state = OptimState::new(model, config.stage2_lr, extent(model));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0002);
    let start = Instant::now();
    let w = config.radio_weights;
    let phases: [(usize, LossWeights, &[ParamGroup]); 2] = [
        (config.stage2_iterations, LossWeights { tof: 0.0, ..w }, &STAGE2_GAIN_GROUPS),
        (
            config.stage2_tof_iterations,
            LossWeights {
                visual: 0.0,
                gain: 0.0,
                ..w
            },
            &STAGE2_TOF_GROUPS,
        ),
    ];
    let mut global = 0usize;
    for (phase_idx, (iterations, weights, groups)) in phases.iter().enumerate() {
        for it in 0..*iterations {
            let batch = Batch {
                views: (0..config.batch_size)
                    .map(|_| {
                        let i = rng.gen_range(0..spectra.len());
                        (
                            View::Panorama {
                                pose: spectra[i].pose,
                                map: map.clone(),
                            },
                            &targets[i],
                        )
                    })
                    .collect(),
            };
            let (terms, grads) = run_batch(model, &batch, weights, config.mask_threshold, &settings)?;
            opt_step(model, &grads.params, &mut state, groups);
            global += 1;
            if (it + 1) % config.log_interval.max(1) == 0 || it + 1 == *iterations {
                log(&LogRecord {
                    stage: 2,
                    phase: phase_idx,
                    iteration: global,
                    loss: terms,
                    primitives: model.len(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok(())
}
