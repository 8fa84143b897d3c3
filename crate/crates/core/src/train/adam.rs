use super::config::LearningRates;
use crate::model::{ParamGroup, RrfModel};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam moments for every parameter of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: LearningRates,
    /// Scene diagonal used to scale the position learning rate.
    pub scene_diagonal: f64,
}

impl OptimState {
    pub fn new(model: &RrfModel, lr: LearningRates, scene_diagonal: f64) -> Self {
        let n = model.len() * model.params_per_primitive();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
            scene_diagonal,
        }
    }

    /// Rebuilds the moments after primitives were added or removed.
    /// `sources[i]` names the old primitive whose moments the new primitive
    /// `i` inherits; `None` starts from zero.
    pub fn remap(&mut self, sources: &[Option<usize>], params_per_primitive: usize) {
        let pp = params_per_primitive;
        let mut m = vec![0.0; sources.len() * pp];
        let mut v = vec![0.0; sources.len() * pp];
        for (i, s) in sources.iter().enumerate() {
            if let Some(j) = s {
                m[i * pp..(i + 1) * pp].copy_from_slice(&self.m[j * pp..(j + 1) * pp]);
                v[i * pp..(i + 1) * pp].copy_from_slice(&self.v[j * pp..(j + 1) * pp]);
            }
        }
        self.m = m;
        self.v = v;
    }
}

/// One bias-corrected Adam step on the `active` parameter groups.
///
/// Inactive groups are not read or written. Quaternions are renormalized
/// when rotations are active, and updated values are rounded to `f32`.
pub fn opt_step(model: &mut RrfModel, grads: &[f64], state: &mut OptimState, active: &[ParamGroup]) {
    let pp = model.params_per_primitive();
    assert_eq!(grads.len(), model.len() * pp, "gradient length");
    assert_eq!(state.m.len(), grads.len(), "optimizer state length");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let ranges: Vec<(std::ops::Range<usize>, f64)> = active
        .iter()
        .map(|g| (g.range(model.sh_degree), state.lr.get(*g, state.scene_diagonal)))
        .collect();
    let mut params = vec![0.0; pp];
    for (i, g) in model.gaussians.iter_mut().enumerate() {
        g.write_params(&mut params);
        for (range, lr) in &ranges {
            for k in range.clone() {
                let idx = i * pp + k;
                let gr = grads[idx];
                let m = BETA1 * state.m[idx] + (1.0 - BETA1) * gr;
                let v = BETA2 * state.v[idx] + (1.0 - BETA2) * gr * gr;
                state.m[idx] = m;
                state.v[idx] = v;
                let update = lr * (m / c1) / ((v / c2).sqrt() + EPS);
                params[k] = (params[k] - update) as f32 as f64;
            }
        }
        g.read_params(&params);
        if active.contains(&ParamGroup::Rotation) {
            g.renormalize_rotation();
            g.rotation = g.rotation.map(|v| v as f32 as f64);
        }
    }
}
