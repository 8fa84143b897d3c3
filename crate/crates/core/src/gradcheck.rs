//! Finite-difference verification of the analytic gradients.
//!
//! Every parameter is perturbed by `+-h` and the central difference of the
//! full training loss is compared with the backward pass. The loss is only
//! piecewise smooth: contributor lists, alpha and value clamps, early
//! termination, culling and L1 residual signs can change under a
//! perturbation. Parameters whose stencil crosses such a boundary are
//! counted as skipped rather than compared.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logit, ParamGroup, RrfModel, SceneMeta};
use crate::pose::normalize_quat;
use crate::raster::{PinholeCamera, RenderSettings, ViewGradient};
use crate::spectrum::ChannelImage;
use crate::train::{GainNorm, LossWeights, View};
use crate::{RxPose, Vec3, NUM_CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub primitives: usize,
    pub resolution: usize,
    pub sh_degree: usize,
    /// Central-difference half step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Gradients below this magnitude are compared in absolute terms.
    pub floor: f64,
    pub seed: u64,
    /// Penalty on the gain residual of the checked loss.
    #[serde(default)]
    pub gain_norm: GainNorm,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            primitives: 50,
            resolution: 32,
            sh_degree: 3,
            step: 1e-5,
            tolerance: 1e-3,
            floor: 1e-6,
            seed: 0,
            gain_norm: GainNorm::L1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub primitives: usize,
    pub groups: Vec<GroupReport>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Relative error with a floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// A random model in front of a camera at the origin looking along +x,
/// together with that camera and a random target image.
pub fn random_problem(config: &GradcheckConfig) -> (RrfModel, PinholeCamera, ChannelImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let meta = SceneMeta {
        tau_max: 1e-7,
        g_ref: 1e-2,
        carrier_freq: 2.4e9,
        tx_position: [0.0; 3],
    };
    let fov = 60f64.to_radians();
    let cam = PinholeCamera::along_pose(&RxPose::identity_at(Vec3::zeros()), fov, config.resolution);
    let mut model = RrfModel::empty(config.sh_degree, meta);
    let half = (0.5 * fov).tan();
    let k = model.coeffs_per_channel();
    for _ in 0..config.primitives {
        let depth = rng.gen_range(1.5..4.0);
        let pos = Vec3::new(
            depth,
            rng.gen_range(-0.9..0.9) * half * depth,
            rng.gen_range(-0.9..0.9) * half * depth,
        );
        let log_scale = [0; 3].map(|_| rng.gen_range(0.03f64..0.25).ln());
        let rotation = normalize_quat([0; 4].map(|_| rng.gen_range(-1.0..1.0)));
        let values = [rng.gen_range(0.3..0.7), rng.gen_range(0.2..0.8), rng.gen_range(0.1..0.5)];
        let mut g = model.primitive(pos, log_scale, rotation, logit(rng.gen_range(0.2..0.9)), values);
        for c in 0..NUM_CHANNELS {
            for i in 1..k {
                g.sh[c * k + i] = rng.gen_range(-0.1..0.1);
            }
        }
        model.gaussians.push(g);
    }
    let mut target = ChannelImage::zeros(config.resolution, config.resolution, NUM_CHANNELS);
    target.data.iter_mut().for_each(|v| *v = rng.gen());
    (model, cam, target)
}

/// Loss weights used by gradient checks: every channel active.
pub const CHECK_WEIGHTS: LossWeights = LossWeights {
    visual: 1.0,
    gain: 1.0,
    tof: 1.0,
    gain_norm: GainNorm::L1,
};

/// Compares analytic and central-difference gradients of every parameter.
pub fn check_gradients(
    model: &RrfModel,
    view: &View,
    target: &ChannelImage,
    config: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let settings = RenderSettings::default();
    let thr = 1e-3;
    let weights = LossWeights {
        gain_norm: config.gain_norm,
        ..CHECK_WEIGHTS
    };
    let mut analytic = ViewGradient::zeros(model);
    view.loss_and_gradient(model, target, &weights, thr, &settings, &mut analytic)?;
    let (_, base_sig) = view.loss_with_signature(model, target, &weights, thr, &settings)?;
    let pp = model.params_per_primitive();
    let mut groups: Vec<GroupReport> = ParamGroup::ALL
        .iter()
        .map(|g| GroupReport {
            group: g.name().to_string(),
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        })
        .collect();
    // Per primitive: (group index, relative error or None when skipped).
    // Primitives are probed independently and folded back in index order.
    let per_primitive = crate::par::map_range(model.len(), |i| -> Result<Vec<(usize, Option<f64>)>> {
        let mut params = vec![0.0; pp];
        model.gaussians[i].write_params(&mut params);
        let mut probe = model.clone();
        let mut out = Vec::new();
        for (gi, group) in ParamGroup::ALL.iter().enumerate() {
            for k in group.range(model.sh_degree) {
                let mut eval = |delta: f64| -> Result<(f64, u64)> {
                    let mut p = params.clone();
                    p[k] += delta;
                    probe.gaussians[i].read_params(&p);
                    let (t, s) = view.loss_with_signature(&probe, target, &weights, thr, &settings)?;
                    Ok((t.total, s))
                };
                let (lp, sp) = eval(config.step)?;
                let (lm, sm) = eval(-config.step)?;
                probe.gaussians[i].read_params(&params);
                if sp != base_sig || sm != base_sig {
                    out.push((gi, None));
                    continue;
                }
                let numeric = (lp - lm) / (2.0 * config.step);
                let a = analytic.params[i * pp + k];
                out.push((gi, Some(relative_error(a, numeric, config.floor))));
            }
        }
        Ok(out)
    });
    for results in per_primitive {
        for (gi, rel) in results? {
            let report = &mut groups[gi];
            match rel {
                None => report.skipped += 1,
                Some(rel) => {
                    report.checked += 1;
                    report.max_rel_error = report.max_rel_error.max(rel);
                }
            }
        }
    }
    let max_rel_error = groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    let complete = groups.iter().all(|g| g.checked > 0);
    Ok(GradcheckReport {
        seed: config.seed,
        primitives: model.len(),
        groups,
        max_rel_error,
        passed: complete && max_rel_error <= config.tolerance,
    })
}

/// Gradient check of a random problem built from `config`.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.primitives == 0 || config.resolution == 0 {
        return Err(Error::InvalidArgument("gradcheck needs primitives and pixels".into()));
    }
    let (model, cam, target) = random_problem(config);
    check_gradients(&model, &View::Pinhole(cam), &target, config)
}
