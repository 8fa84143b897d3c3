//! Held-out evaluation of a trained model against a dataset split.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::csi::extract_mpcs;
use crate::dataset::{visual_camera, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::RrfModel;
use crate::oracle::trace_paths;
use crate::raster::{render_panorama, render_view_image, PinholeCamera, RenderSettings};
use crate::spectrum::{equirect_pixel, ChannelImage};
use crate::train::ssim;
use crate::{CH_GAIN, CH_TOF, CH_VISUAL};

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP`].
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64;
    if mse == 0.0 || peak <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Minimum rendered peak gain (normalized) counted as a path.
    pub min_gain: f64,
    pub nms_radius: f64,
    /// Measure render latency (makes the report time-dependent).
    pub timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            min_gain: 1e-3,
            nms_radius: 2.0,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseMetrics {
    pub record: usize,
    pub psnr_gain: f64,
    pub psnr_tof: f64,
    pub psnr_visual: Option<f64>,
    pub ssim_visual: Option<f64>,
    /// Angle between rendered and traced dominant arrivals in pixel
    /// pitches; `None` when the render has no peak above `min_gain`.
    pub aoa_error_pitch: Option<f64>,
    /// Absolute normalized ToF error at the traced dominant-path pixel.
    pub tof_error_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub poses: usize,
    pub psnr_gain_mean: f64,
    pub psnr_tof_mean: f64,
    pub psnr_visual_mean: Option<f64>,
    pub ssim_visual_mean: Option<f64>,
    /// Fraction of poses whose dominant AoA error is at most 2 pitches.
    pub aoa_within_2_pitch: f64,
    pub aoa_error_pitch_median: Option<f64>,
    /// Mean of `tof_error_norm` over poses.
    pub tof_mae_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<Latency>,
    pub per_pose: Vec<PoseMetrics>,
}

/// `q`-quantile (nearest rank) of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[idx])
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Compares renders of `model` with a dataset split.
pub fn evaluate(model: &RrfModel, ds: &Dataset, split: Split, cfg: &EvalConfig) -> Result<EvalReport> {
    let records = ds.records(split);
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = &ds.manifest;
    let height = m.resolution[0];
    let settings = RenderSettings::default();
    let meta = ds.scene.meta();
    let mut per_pose = Vec::with_capacity(records.len());
    let mut times = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let pose = r.pose();
        let target = ds.spectrum(r)?.to_image();
        let start = Instant::now();
        let rendered = render_panorama(model, &pose, height)?;
        if cfg.timing {
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let img = rendered.to_image();
        let peak = target.plane(CH_GAIN).iter().copied().fold(0.0, f64::max);
        let psnr_gain = psnr(img.plane(CH_GAIN), target.plane(CH_GAIN), peak);
        let psnr_tof = psnr(img.plane(CH_TOF), target.plane(CH_TOF), 1.0);

        let paths = trace_paths(&ds.scene, &pose.position(), m.max_order)?;
        let dominant = paths.first().ok_or(Error::NoPaths)?;
        let local = pose.rotation().transpose() * dominant.aoa();
        let (row, col) = equirect_pixel(&local, height, 2 * height);
        let tof_error_norm = (img.get(CH_TOF, row, col) - target.get(CH_TOF, row, col)).abs();
        let found = extract_mpcs(&rendered, &meta, 1, cfg.min_gain, cfg.nms_radius)?;
        let aoa_error_pitch = found
            .first()
            .map(|f| f.aoa().dot(&dominant.aoa()).clamp(-1.0, 1.0).acos() / rendered.pixel_pitch());

        let (psnr_visual, ssim_visual) = match &r.visual {
            Some(v) => {
                let t: ChannelImage = crate::io::read_spectrum(&ds.dir.join(v))?.to_image();
                let cam = visual_camera(&pose, m.visual_fov_deg, m.visual_resolution);
                let out = render_view_image(model, &cam, &settings);
                let p = psnr(out.plane(CH_VISUAL), t.plane(CH_VISUAL), 1.0);
                let (s, _) = ssim(out.plane(CH_VISUAL), t.plane(CH_VISUAL), t.height, t.width, false);
                (Some(p), Some(s))
            }
            None => (None, None),
        };
        per_pose.push(PoseMetrics {
            record: i,
            psnr_gain,
            psnr_tof,
            psnr_visual,
            ssim_visual,
            aoa_error_pitch,
            tof_error_norm,
        });
    }
    let n = per_pose.len();
    let col = |f: &dyn Fn(&PoseMetrics) -> Option<f64>| per_pose.iter().filter_map(f).collect::<Vec<f64>>();
    let aoa = col(&|p| p.aoa_error_pitch);
    let within = per_pose.iter().filter(|p| p.aoa_error_pitch.is_some_and(|e| e <= 2.0)).count();
    Ok(EvalReport {
        split,
        poses: n,
        psnr_gain_mean: mean(&col(&|p| Some(p.psnr_gain))).unwrap_or(0.0),
        psnr_tof_mean: mean(&col(&|p| Some(p.psnr_tof))).unwrap_or(0.0),
        psnr_visual_mean: mean(&col(&|p| p.psnr_visual)),
        ssim_visual_mean: mean(&col(&|p| p.ssim_visual)),
        aoa_within_2_pitch: within as f64 / n as f64,
        aoa_error_pitch_median: quantile(&aoa, 0.5),
        tof_mae_norm: mean(&col(&|p| Some(p.tof_error_norm))).unwrap_or(0.0),
        latency: cfg.timing.then(|| Latency {
            median_ms: quantile(&times, 0.5).unwrap_or(0.0),
            p95_ms: quantile(&times, 0.95).unwrap_or(0.0),
        }),
        per_pose,
    })
}

/// Wall-clock latency of `runs` pinhole renders after `warmup` untimed ones.
pub fn render_latency(model: &RrfModel, cam: &PinholeCamera, warmup: usize, runs: usize) -> Latency {
    let settings = RenderSettings::default();
    for _ in 0..warmup {
        std::hint::black_box(render_view_image(model, cam, &settings));
    }
    let times: Vec<f64> = (0..runs.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(render_view_image(model, cam, &settings));
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    Latency {
        median_ms: quantile(&times, 0.5).unwrap_or(0.0),
        p95_ms: quantile(&times, 0.95).unwrap_or(0.0),
    }
}

/// Benchmark workload: `n` primitives spread over the walls of the
/// reference room at opacity 0.8, seen by a camera in the middle of the room.
pub fn benchmark_scene(n: usize, resolution: usize, seed: u64) -> Result<(RrfModel, PinholeCamera)> {
    let scene = crate::oracle::Scene::reference_box();
    let mut model = crate::model::init_model(&scene, n, 0, seed, 3)?;
    for g in &mut model.gaussians {
        g.opacity_logit = crate::model::logit(0.8);
    }
    let pose = crate::RxPose::from_yaw(crate::Vec3::new(2.5, 2.0, 1.5), 0.3);
    Ok((model, PinholeCamera::along_pose(&pose, 90f64.to_radians(), resolution)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn psnr_definition() {
        let a = vec![0.5; 100];
        assert_eq!(psnr(&a, &a, 1.0), PSNR_CAP);
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        assert_relative_eq!(psnr(&a, &b, 1.0), 40.0, epsilon = 1e-9);
    }

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(3.0));
        assert_eq!(quantile(&v, 0.95), Some(5.0));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
