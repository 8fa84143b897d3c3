use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mean_knn_distance, RrfModel};
use crate::oracle::Scene;
use crate::{Error, Result, Vec3, NUM_CHANNELS};

/// Initial value each channel evaluates to in every direction.
const CHANNEL_DEFAULTS: [f64; NUM_CHANNELS] = [0.5, 0.0, 0.0];
const INITIAL_OPACITY: f64 = 0.1;
const NEIGHBOURS: usize = 3;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Seeds a model with `n_surface` primitives on the facets (uniform by area)
/// and `n_uniform` primitives uniform in the scene bounds.
///
/// Primitives start isotropic with a radius equal to their mean distance to
/// the three nearest neighbours, opacity 0.1, and constant channel values
/// (visual 0.5, gain 0, ToF 0).
pub fn init_model(
    scene: &Scene,
    n_surface: usize,
    n_uniform: usize,
    seed: u64,
    sh_degree: usize,
) -> Result<RrfModel> {
    if n_surface + n_uniform == 0 {
        return Err(Error::InvalidArgument("model needs at least one primitive".into()));
    }
    if n_surface > 0 && scene.facets.is_empty() {
        return Err(Error::InvalidArgument("surface sampling requested but scene has no facets".into()));
    }
    if sh_degree > crate::sh::MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("SH degree {sh_degree} > 3")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = scene.facets.iter().map(|f| f.area()).collect();
    let total_area: f64 = areas.iter().sum();
    let mut points = Vec::with_capacity(n_surface + n_uniform);
    for _ in 0..n_surface {
        let mut pick = rng.gen::<f64>() * total_area;
        let mut idx = areas.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                idx = i;
                break;
            }
            pick -= a;
        }
        points.push(scene.facets[idx].sample_point(&mut rng));
    }
    let lo = Vec3::from(scene.aabb.min);
    let ext = scene.aabb.extent();
    for _ in 0..n_uniform {
        let u = Vec3::new(rng.gen(), rng.gen(), rng.gen());
        points.push(lo + ext.component_mul(&u));
    }

    let diag = scene.aabb.diagonal();
    let nn = mean_knn_distance(&points, NEIGHBOURS);
    let mut model = RrfModel::empty(sh_degree, scene.meta());
    for (p, d) in points.iter().zip(nn) {
        let radius = d.unwrap_or(0.01 * diag).clamp(1e-6, diag);
        let ls = radius.ln();
        model.gaussians.push(model.primitive(
            *p,
            [ls; 3],
            [1.0, 0.0, 0.0, 0.0],
            logit(INITIAL_OPACITY),
            CHANNEL_DEFAULTS,
        ));
    }
    model.snap_to_f32();
    Ok(model)
}
