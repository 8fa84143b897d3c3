use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::ChannelImage;
use crate::{CH_GAIN, CH_TOF, CH_VISUAL, NUM_CHANNELS};

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
/// Share of the SSIM term in the visual loss.
const SSIM_WEIGHT: f64 = 0.2;

/// Penalty applied to the gain residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainNorm {
    /// Mean absolute error.
    #[default]
    L1,
    /// Mean squared error.
    L2,
}

/// Per-channel weights of the total loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub visual: f64,
    pub gain: f64,
    pub tof: f64,
    #[serde(default)]
    pub gain_norm: GainNorm,
}

impl LossWeights {
    pub const VISUAL: LossWeights = LossWeights {
        visual: 1.0,
        gain: 0.0,
        tof: 0.0,
        gain_norm: GainNorm::L1,
    };
    /// Radio targets are sparse peaks on a zero background. Under L1 the
    /// best constant over a splat wider than one pixel is the median of its
    /// pixels, which is 0, so gain is fitted with L2 instead.
    pub const RADIO: LossWeights = LossWeights {
        visual: 0.0,
        gain: 1.0,
        tof: 1.0,
        gain_norm: GainNorm::L2,
    };
}

/// Individual loss terms (unweighted) and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub visual: f64,
    pub gain: f64,
    pub tof: f64,
    pub total: f64,
}

fn gaussian_kernel() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut k = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *v = (-0.5 * d * d / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter with zero padding. The kernel is symmetric, so
/// this operator is its own transpose.
fn blur(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let r = SSIM_RADIUS as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as isize + i as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += kv * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean SSIM of `x` against `y` and, optionally, its gradient with respect
/// to `x`.
pub fn ssim(x: &[f64], y: &[f64], h: usize, w: usize, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let n = h * w;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mu_x = blur(x, h, w);
    let mu_y = blur(y, h, w);
    let e_xx = blur(&sq(x, x), h, w);
    let e_yy = blur(&sq(y, y), h, w);
    let e_xy = blur(&sq(x, y), h, w);
    let mut total = 0.0;
    let mut d_mu = vec![0.0; n];
    let mut d_exx = vec![0.0; n];
    let mut d_exy = vec![0.0; n];
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let a1 = 2.0 * mx * my + SSIM_C1;
        let a2 = 2.0 * (e_xy[i] - mx * my) + SSIM_C2;
        let b1 = mx * mx + my * my + SSIM_C1;
        let b2 = (e_xx[i] - mx * mx) + (e_yy[i] - my * my) + SSIM_C2;
        let s = a1 * a2 / (b1 * b2);
        total += s;
        if want_grad {
            let inv = 1.0 / (b1 * b2);
            d_mu[i] = (2.0 * my * a2 - 2.0 * my * a1) * inv - s * (2.0 * mx / b1 - 2.0 * mx / b2);
            d_exx[i] = -s / b2;
            d_exy[i] = 2.0 * a1 * inv;
        }
    }
    let mean = total / n as f64;
    if !want_grad {
        return (mean, None);
    }
    let scale = 1.0 / n as f64;
    let g_mu = blur(&d_mu, h, w);
    let g_exx = blur(&d_exx, h, w);
    let g_exy = blur(&d_exy, h, w);
    let grad = (0..n)
        .map(|i| scale * (g_mu[i] + 2.0 * x[i] * g_exx[i] + y[i] * g_exy[i]))
        .collect();
    (mean, Some(grad))
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn evaluate(
    rendered: &ChannelImage,
    target: &ChannelImage,
    weights: &LossWeights,
    mask_threshold: f64,
    want_grad: bool,
) -> Result<(LossTerms, Option<ChannelImage>)> {
    if !rendered.same_shape(target) || rendered.channels != NUM_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "rendered {}x{}x{} vs target {}x{}x{}",
            rendered.channels, rendered.height, rendered.width, target.channels, target.height, target.width
        )));
    }
    let (h, w) = (rendered.height, rendered.width);
    let n = (h * w) as f64;
    let mut terms = LossTerms::default();
    let mut grad = want_grad.then(|| ChannelImage::zeros(h, w, NUM_CHANNELS));

    if weights.visual != 0.0 {
        let (r, t) = (rendered.plane(CH_VISUAL), target.plane(CH_VISUAL));
        let l1 = r.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        let (s, ds) = ssim(r, t, h, w, want_grad);
        terms.visual = (1.0 - SSIM_WEIGHT) * l1 + SSIM_WEIGHT * (1.0 - s);
        if let (Some(g), Some(ds)) = (grad.as_mut(), ds) {
            let wv = weights.visual;
            for ((o, (a, b)), d) in g.plane_mut(CH_VISUAL).iter_mut().zip(r.iter().zip(t)).zip(ds) {
                *o = wv * ((1.0 - SSIM_WEIGHT) * sign(a - b) / n - SSIM_WEIGHT * d);
            }
        }
    }
    if weights.gain != 0.0 {
        let (r, t) = (rendered.plane(CH_GAIN), target.plane(CH_GAIN));
        let l2 = weights.gain_norm == GainNorm::L2;
        terms.gain = r
            .iter()
            .zip(t)
            .map(|(a, b)| if l2 { (a - b) * (a - b) } else { (a - b).abs() })
            .sum::<f64>()
            / n;
        if let Some(g) = grad.as_mut() {
            for (o, (a, b)) in g.plane_mut(CH_GAIN).iter_mut().zip(r.iter().zip(t)) {
                let d = if l2 { 2.0 * (a - b) } else { sign(a - b) };
                *o = weights.gain * d / n;
            }
        }
    }
    if weights.tof != 0.0 {
        let (r, t) = (rendered.plane(CH_TOF), target.plane(CH_TOF));
        let mask: Vec<bool> = target.plane(CH_GAIN).iter().map(|g| *g > mask_threshold).collect();
        let count = mask.iter().filter(|m| **m).count();
        if count > 0 {
            let m = count as f64;
            terms.tof = r
                .iter()
                .zip(t)
                .zip(&mask)
                .filter(|(_, k)| **k)
                .map(|((a, b), _)| (a - b).abs())
                .sum::<f64>()
                / m;
            if let Some(g) = grad.as_mut() {
                for ((o, (a, b)), k) in g.plane_mut(CH_TOF).iter_mut().zip(r.iter().zip(t)).zip(&mask) {
                    if *k {
                        *o = weights.tof * sign(a - b) / m;
                    }
                }
            }
        }
    }
    terms.total = weights.visual * terms.visual + weights.gain * terms.gain + weights.tof * terms.tof;
    Ok((terms, grad))
}

/// Weighted training loss of a rendered `[visual, gain, tof]` image.
///
/// Visual uses `0.8 L1 + 0.2 (1 - SSIM)`, gain uses the weights' norm, and
/// ToF uses L1 restricted to pixels whose target gain exceeds `mask_threshold`.
pub fn loss(
    rendered: &ChannelImage,
    target: &ChannelImage,
    weights: &LossWeights,
    mask_threshold: f64,
) -> Result<LossTerms> {
    evaluate(rendered, target, weights, mask_threshold, false).map(|(t, _)| t)
}

/// Loss together with its gradient with respect to `rendered`.
pub fn loss_and_grad(
    rendered: &ChannelImage,
    target: &ChannelImage,
    weights: &LossWeights,
    mask_threshold: f64,
) -> Result<(LossTerms, ChannelImage)> {
    let (terms, grad) = evaluate(rendered, target, weights, mask_threshold, true)?;
    Ok((terms, grad.expect("gradient requested")))
}

/// Sign pattern of the L1 residuals of the active channels; the loss is
/// smooth in the rendered image wherever this pattern is constant.
pub(crate) fn residual_signs(rendered: &ChannelImage, target: &ChannelImage, weights: &LossWeights, mask_threshold: f64) -> Vec<i8> {
    let mut out = Vec::new();
    let mut push = |c: usize, mask: Option<&[f64]>| {
        for (i, (a, b)) in rendered.plane(c).iter().zip(target.plane(c)).enumerate() {
            if mask.is_some_and(|m| m[i] <= mask_threshold) {
                continue;
            }
            out.push(sign(a - b) as i8);
        }
    };
    if weights.visual != 0.0 {
        push(CH_VISUAL, None);
    }
    if weights.gain != 0.0 && weights.gain_norm == GainNorm::L1 {
        push(CH_GAIN, None);
    }
    if weights.tof != 0.0 {
        push(CH_TOF, Some(target.plane(CH_GAIN)));
    }
    out
}
