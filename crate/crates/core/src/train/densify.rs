use super::config::DensifyConfig;
use crate::model::{logit, GaussianPrimitive, RrfModel};
use crate::Vec3;

/// Scale divisor applied to split children.
const SPLIT_SCALE: f64 = 1.6;
/// Children sit this many parent standard deviations from the centre.
const SPLIT_OFFSET: f64 = 0.5;
const MIN_OPACITY: f64 = 0.005;
const MAX_OPACITY: f64 = 0.99;

/// Screen-space gradient statistics accumulated between densification steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradStats {
    pub sum: Vec<f64>,
    pub count: Vec<u32>,
}

impl GradStats {
    pub fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn add(&mut self, screen_grad: &[f64], visible: &[u32]) {
        for (i, (g, v)) in screen_grad.iter().zip(visible).enumerate() {
            self.sum[i] += g;
            self.count[i] += v;
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.sum[i] / self.count[i] as f64
        }
    }
}

/// Splits `g` into two children along its major axis. At the parent
/// centre the pair composites to the parent's opacity.
fn split(g: &GaussianPrimitive) -> [GaussianPrimitive; 2] {
    let scale = g.scale();
    let major = (0..3).max_by(|&a, &b| scale[a].total_cmp(&scale[b])).expect("three axes");
    let axis: Vec3 = g.rotation_matrix().column(major).into();
    let offset = axis * (SPLIT_OFFSET * scale[major]);
    // child falloff at the parent centre
    let k = (-0.5 * (SPLIT_OFFSET * SPLIT_SCALE).powi(2)).exp();
    let alpha = ((1.0 - (1.0 - g.opacity()).sqrt()) / k).clamp(MIN_OPACITY, MAX_OPACITY);
    let child = |sign: f64| {
        let mut c = g.clone();
        let p = g.position() + offset * sign;
        c.position = [p.x, p.y, p.z];
        c.log_scale = g.log_scale.map(|s| s - SPLIT_SCALE.ln());
        c.opacity_logit = logit(alpha);
        c.snap_to_f32();
        c
    };
    [child(1.0), child(-1.0)]
}

/// Grows primitives with large mean screen-space gradients (clone when
/// small, split when large), then removes nearly transparent ones.
///
/// Returns, for every primitive of the new model, the index of the old
/// primitive it was derived from, with `None` for fresh split children.
pub fn densify_and_prune(
    model: &mut RrfModel,
    stats: &GradStats,
    config: &DensifyConfig,
    scene_diagonal: f64,
) -> Vec<Option<usize>> {
    let tau_s = config.scale_threshold * scene_diagonal;
    let mut out = Vec::with_capacity(model.len());
    let mut sources = Vec::with_capacity(model.len());
    let mut budget = config.max_primitives.saturating_sub(model.len());
    for (i, g) in model.gaussians.iter().enumerate() {
        let grow = stats.mean(i) > config.grad_threshold && budget > 0;
        if !grow {
            out.push(g.clone());
            sources.push(Some(i));
            continue;
        }
        budget -= 1;
        let max_scale = g.scale().max();
        if max_scale < tau_s {
            out.push(g.clone());
            sources.push(Some(i));
            out.push(g.clone());
            sources.push(None);
        } else {
            let [a, b] = split(g);
            out.push(a);
            sources.push(None);
            out.push(b);
            sources.push(None);
        }
    }
    let keep: Vec<bool> = out.iter().map(|g| g.opacity() >= config.prune_opacity).collect();
    model.gaussians = out.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(g, _)| g).collect();
    sources.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| s).collect()
}
