use nalgebra::{Matrix2, Matrix2x3};

use super::blend::{composite, Contribution};
use super::render::Frame;
use super::{channel_values, PinholeCamera, RenderSettings};
use crate::error::{Error, Result};
use crate::model::{sigmoid, GaussianPrimitive, RrfModel, SceneMeta, OFF_LOG_SCALE, OFF_OPACITY, OFF_POSITION, OFF_ROTATION, OFF_SH};
use crate::pose::{normalize_quat, quat_to_matrix};
use crate::sh::{basis, basis_grad, num_coeffs};
use crate::spectrum::ChannelImage;
use crate::{par, Mat3, Vec3, CH_GAIN, CH_TOF, CH_VISUAL, SPEED_OF_LIGHT};

/// Loss gradient with respect to one projected splat.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProjectedGrad {
    pub d_mean: [f64; 2],
    /// Gradient on the conic entries `(0,0)`, `(0,1)` and `(1,1)`; the
    /// `(0,1)` entry counts one of the two symmetric off-diagonal slots.
    pub d_conic: [f64; 3],
    pub d_alpha: f64,
    pub d_carriers: [f64; 3],
}

impl ProjectedGrad {
    fn add(&mut self, o: &ProjectedGrad) {
        for i in 0..2 {
            self.d_mean[i] += o.d_mean[i];
        }
        for i in 0..3 {
            self.d_conic[i] += o.d_conic[i];
            self.d_carriers[i] += o.d_carriers[i];
        }
        self.d_alpha += o.d_alpha;
    }
}

/// Parameter gradient accumulated over one or more views.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewGradient {
    /// Flat gradient, `params_per_primitive` entries per primitive.
    pub params: Vec<f64>,
    /// Per primitive, summed norm of the screen-space mean gradient in
    /// normalized device coordinates.
    pub screen_grad: Vec<f64>,
    /// Per primitive, number of views in which it received a gradient.
    pub visible: Vec<u32>,
}

impl ViewGradient {
    pub fn zeros(model: &RrfModel) -> Self {
        Self {
            params: vec![0.0; model.len() * model.params_per_primitive()],
            screen_grad: vec![0.0; model.len()],
            visible: vec![0; model.len()],
        }
    }

    /// Adds `other` scaled by `w` into `self`; view statistics add unscaled.
    pub fn accumulate(&mut self, other: &ViewGradient, w: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += w * b;
        }
        for (a, b) in self.screen_grad.iter_mut().zip(&other.screen_grad) {
            *a += b;
        }
        for (a, b) in self.visible.iter_mut().zip(&other.visible) {
            *a += b;
        }
    }
}

/// Reverse sweep of one pixel; adds per-splat gradients into `grads`.
fn pixel_backward(
    splats: &[super::blend::Splat],
    x: f64,
    y: f64,
    d_c: [f64; 3],
    settings: &RenderSettings,
    contribs: &mut Vec<Contribution>,
    grads: &mut [ProjectedGrad],
) {
    contribs.clear();
    composite(splats, x, y, settings, |c| contribs.push(*c));
    // carriers accumulated behind the current splat
    let mut behind = [0.0; 3];
    for c in contribs.iter().rev() {
        let s = &splats[c.k];
        let g = &mut grads[c.k];
        let w = c.a * c.t;
        let mut dot_c = 0.0;
        let mut dot_b = 0.0;
        for ch in 0..3 {
            g.d_carriers[ch] += w * d_c[ch];
            dot_c += d_c[ch] * s.carriers[ch];
            dot_b += d_c[ch] * behind[ch];
        }
        let d_a = c.t * dot_c - dot_b / (1.0 - c.a);
        for ch in 0..3 {
            behind[ch] += w * s.carriers[ch];
        }
        if c.clamped {
            continue;
        }
        g.d_alpha += d_a * c.falloff;
        let d_q = -0.5 * c.a * d_a;
        let [ca, cb, cc] = s.conic;
        let (ax, ay) = (ca * c.dx + cb * c.dy, cb * c.dx + cc * c.dy);
        g.d_mean[0] -= 2.0 * d_q * ax;
        g.d_mean[1] -= 2.0 * d_q * ay;
        g.d_conic[0] += d_q * c.dx * c.dx;
        g.d_conic[1] += d_q * c.dx * c.dy;
        g.d_conic[2] += d_q * c.dy * c.dy;
    }
}

/// Gradients on every projected splat of `frame` given the carrier gradient.
/// Tiles are processed in parallel and merged in tile order, so the result
/// does not depend on scheduling.
fn splat_gradients(frame: &Frame, d_carriers: &ChannelImage, settings: &RenderSettings) -> Vec<ProjectedGrad> {
    let grid = &frame.grid;
    let per_tile = par::map_range(grid.num_tiles(), |t| {
        let splats = &frame.splats[t];
        let mut grads = vec![ProjectedGrad::default(); splats.len()];
        if splats.is_empty() {
            return grads;
        }
        let mut contribs = Vec::new();
        let (x0, x1, y0, y1) = grid.tile_bounds(t);
        for row in y0..y1 {
            for col in x0..x1 {
                let d_c = [
                    d_carriers.get(0, row, col),
                    d_carriers.get(1, row, col),
                    d_carriers.get(2, row, col),
                ];
                if d_c == [0.0; 3] {
                    continue;
                }
                pixel_backward(splats, col as f64 + 0.5, row as f64 + 0.5, d_c, settings, &mut contribs, &mut grads);
            }
        }
        grads
    });
    let mut out = vec![ProjectedGrad::default(); frame.projected.len()];
    for (t, grads) in per_tile.iter().enumerate() {
        for (g, &i) in grads.iter().zip(&grid.lists[t]) {
            out[i as usize].add(g);
        }
    }
    out
}

#[inline]
fn cofactor(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(1, 1)], -m[(1, 0)], -m[(0, 1)], m[(0, 0)])
}

/// Chains a splat gradient back to the primitive's parameters, adding into
/// `out` (one primitive's slice). Returns the screen-space mean gradient.
pub fn project_backward(
    g: &GaussianPrimitive,
    cam: &PinholeCamera,
    meta: &SceneMeta,
    sh_degree: usize,
    settings: &RenderSettings,
    grad: &ProjectedGrad,
    out: &mut [f64],
) -> [f64; 2] {
    let w = *cam.world_to_cam();
    let eye = cam.position();
    let p = g.position();
    let t = w * (p - eye);
    let z = t.z;
    let f = cam.focal();
    let mut g_t = Vec3::zeros();
    let [gu, gv] = grad.d_mean;
    g_t.x += gu * f / z;
    g_t.y += gv * f / z;
    g_t.z -= f * (t.x * gu + t.y * gv) / (z * z);

    // forward recomputation of the covariance chain
    let qn = normalize_quat(g.rotation);
    let r = quat_to_matrix(g.rotation);
    let s = g.scale();
    let m = r * Mat3::from_diagonal(&s);
    let sigma = m * m.transpose();
    let j = Matrix2x3::new(f / z, 0.0, -f * t.x / (z * z), 0.0, f / z, -f * t.y / (z * z));
    let tm = j * w;
    let pre = tm * sigma * tm.transpose();
    let det_pre = pre[(0, 0)] * pre[(1, 1)] - pre[(0, 1)] * pre[(1, 0)];
    let a = pre[(0, 0)] + settings.aa_floor;
    let b = 0.5 * (pre[(0, 1)] + pre[(1, 0)]);
    let c = pre[(1, 1)] + settings.aa_floor;
    let det = a * c - b * b;
    let rho = (det_pre / det).sqrt();
    let sig = sigmoid(g.opacity_logit);

    out[OFF_OPACITY] += grad.d_alpha * rho * sig * (1.0 - sig);
    let d_rho = grad.d_alpha * sig;

    let conic = Matrix2::new(c / det, -b / det, -b / det, a / det);
    let g_conic = Matrix2::new(grad.d_conic[0], grad.d_conic[1], grad.d_conic[1], grad.d_conic[2]);
    let post = Matrix2::new(a, b, b, c);
    let mut g_pre = -conic * g_conic * conic;
    // rho = sqrt(det_pre / det_post)
    g_pre += (cofactor(&pre) / det_pre - cofactor(&post) / det) * (0.5 * d_rho * rho);

    let g_sigma = tm.transpose() * g_pre * tm;
    let g_tm = (g_pre + g_pre.transpose()) * tm * sigma;
    let g_j = g_tm * w.transpose();
    let z2 = z * z;
    g_t.x -= g_j[(0, 2)] * f / z2;
    g_t.y -= g_j[(1, 2)] * f / z2;
    g_t.z += -f / z2 * (g_j[(0, 0)] + g_j[(1, 1)]) + 2.0 * f * (t.x * g_j[(0, 2)] + t.y * g_j[(1, 2)]) / (z2 * z);

    // sigma = M M^T, M = R diag(s)
    let g_m = (g_sigma + g_sigma.transpose()) * m;
    let mut g_r = Mat3::zeros();
    for jj in 0..3 {
        let mut acc = 0.0;
        for ii in 0..3 {
            g_r[(ii, jj)] = g_m[(ii, jj)] * s[jj];
            acc += g_m[(ii, jj)] * r[(ii, jj)];
        }
        out[OFF_LOG_SCALE + jj] += acc * s[jj];
    }
    let [qw, qx, qy, qz] = qn;
    let gr = |i: usize, k: usize| g_r[(i, k)];
    let d_qhat = [
        2.0 * (-qz * gr(0, 1) + qy * gr(0, 2) + qz * gr(1, 0) - qx * gr(1, 2) - qy * gr(2, 0) + qx * gr(2, 1)),
        2.0 * (qy * gr(0, 1) + qz * gr(0, 2) + qy * gr(1, 0) - 2.0 * qx * gr(1, 1) - qw * gr(1, 2)
            + qz * gr(2, 0)
            + qw * gr(2, 1)
            - 2.0 * qx * gr(2, 2)),
        2.0 * (-2.0 * qy * gr(0, 0) + qx * gr(0, 1) + qw * gr(0, 2) + qx * gr(1, 0) + qz * gr(1, 2) - qw * gr(2, 0)
            + qz * gr(2, 1)
            - 2.0 * qy * gr(2, 2)),
        2.0 * (-2.0 * qz * gr(0, 0) - qw * gr(0, 1) + qx * gr(0, 2) + qw * gr(1, 0) - 2.0 * qz * gr(1, 1)
            + qy * gr(1, 2)
            + qx * gr(2, 0)
            + qy * gr(2, 1)),
    ];
    let norm = g.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
    let proj: f64 = (0..4).map(|i| qn[i] * d_qhat[i]).sum();
    for i in 0..4 {
        out[OFF_ROTATION + i] += (d_qhat[i] - qn[i] * proj) / norm;
    }

    let mut g_p = w.transpose() * g_t;

    // channel values
    let cv = channel_values(g, &eye, meta, sh_degree);
    let [_, gain, tof] = cv.values;
    let dc = grad.d_carriers;
    let mut d_val = [dc[0], dc[1] + dc[2] * tof, dc[2] * gain];
    for (ch, d) in d_val.iter_mut().enumerate() {
        if cv.clamped & (1 << ch) != 0 {
            *d = 0.0;
        }
    }
    let v = eye - p;
    let range = v.norm();
    if range > 0.0 {
        let dir = v / range;
        let k = num_coeffs(sh_degree);
        let bv = basis(sh_degree, &dir);
        let bg = basis_grad(sh_degree, &dir);
        let mut g_dir = Vec3::zeros();
        for ch in [CH_VISUAL, CH_GAIN, CH_TOF] {
            if d_val[ch] == 0.0 {
                continue;
            }
            let coeffs = &g.sh[ch * k..(ch + 1) * k];
            for i in 0..k {
                out[OFF_SH + ch * k + i] += d_val[ch] * bv[i];
                g_dir += Vec3::from(bg[i]) * (d_val[ch] * coeffs[i]);
            }
        }
        let g_v = (g_dir - dir * dir.dot(&g_dir)) / range + dir * (d_val[CH_TOF] / (SPEED_OF_LIGHT * meta.tau_max));
        g_p -= g_v;
    }
    for i in 0..3 {
        out[OFF_POSITION + i] += g_p[i];
    }
    grad.d_mean
}

/// Backpropagates a carrier-image gradient of `frame` into `out`.
pub fn backward_view(
    model: &RrfModel,
    frame: &Frame,
    d_carriers: &ChannelImage,
    settings: &RenderSettings,
    out: &mut ViewGradient,
) -> Result<()> {
    let splat_grads = splat_gradients(frame, d_carriers, settings);
    let pp = model.params_per_primitive();
    let half_res = 0.5 * frame.camera.resolution as f64;
    let chained = par::map_range(frame.projected.len(), |k| {
        let p = &frame.projected[k];
        let mut local = vec![0.0; pp];
        let dm = project_backward(
            &model.gaussians[p.index],
            &frame.camera,
            &model.meta,
            model.sh_degree,
            settings,
            &splat_grads[k],
            &mut local,
        );
        (local, dm)
    });
    for (k, (local, dm)) in chained.iter().enumerate() {
        let i = frame.projected[k].index;
        if local.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { index: i });
        }
        for (a, b) in out.params[i * pp..(i + 1) * pp].iter_mut().zip(local) {
            *a += b;
        }
        let touched = splat_grads[k] != ProjectedGrad::default();
        if touched {
            out.screen_grad[i] += (dm[0] * dm[0] + dm[1] * dm[1]).sqrt() * half_res;
            out.visible[i] += 1;
        }
    }
    Ok(())
}

