use super::{ProjectedGaussian, RenderSettings, FOOTPRINT_Q};
use crate::NUM_CHANNELS;

/// Compact splat used inside the per-pixel loops.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Splat {
    pub mean: [f64; 2],
    pub conic: [f64; 3],
    pub alpha: f64,
    /// Quadratic-form value past which the splat cannot reach `alpha_min`.
    pub q_cut: f64,
    pub carriers: [f64; 3],
}

impl Splat {
    pub fn new(p: &ProjectedGaussian, settings: &RenderSettings) -> Self {
        let reach = if p.alpha > settings.alpha_min {
            2.0 * (p.alpha / settings.alpha_min).ln()
        } else {
            -1.0
        };
        Self {
            mean: p.mean2d,
            conic: p.conic,
            alpha: p.alpha,
            // slightly generous; the exact tests follow
            q_cut: FOOTPRINT_Q.min(reach * (1.0 + 1e-9) + 1e-12),
            carriers: p.carriers(),
        }
    }
}

/// One splat's effect on one pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Contribution {
    /// Position in the splat list.
    pub k: usize,
    /// Effective opacity after the Gaussian falloff and clamp.
    pub a: f64,
    /// Transmittance before this splat.
    pub t: f64,
    /// Gaussian falloff `exp(-q / 2)`.
    pub falloff: f64,
    pub clamped: bool,
    pub dx: f64,
    pub dy: f64,
}

/// Front-to-back compositing of `splats` at continuous point (x, y).
///
/// `visit` sees every contribution in order. Returns the accumulated
/// carriers and the final transmittance.
#[inline]
pub(crate) fn composite<F: FnMut(&Contribution)>(
    splats: &[Splat],
    x: f64,
    y: f64,
    settings: &RenderSettings,
    mut visit: F,
) -> ([f64; 3], f64) {
    let mut t = 1.0;
    let mut acc = [0.0; 3];
    for (k, s) in splats.iter().enumerate() {
        let dx = x - s.mean[0];
        let dy = y - s.mean[1];
        let [ca, cb, cc] = s.conic;
        let q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy;
        if q > s.q_cut || q > FOOTPRINT_Q {
            continue;
        }
        let falloff = (-0.5 * q).exp();
        let mut a = s.alpha * falloff;
        if a < settings.alpha_min {
            continue;
        }
        let clamped = a > settings.alpha_max;
        if clamped {
            a = settings.alpha_max;
        }
        visit(&Contribution {
            k,
            a,
            t,
            falloff,
            clamped,
            dx,
            dy,
        });
        let w = a * t;
        for c in 0..3 {
            acc[c] += w * s.carriers[c];
        }
        t *= 1.0 - a;
        if t < settings.t_stop {
            break;
        }
    }
    (acc, t)
}

/// Gain-weighted ToF resolve of one pixel's carriers.
#[inline]
pub(crate) fn resolve_carriers(c: [f64; 3], eps: f64) -> [f64; NUM_CHANNELS] {
    [c[0], c[1], c[2] / (c[1] + eps)]
}

/// Output of compositing a single pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendResult {
    /// Resolved channels `[visual, gain, tof]`.
    pub channels: [f64; NUM_CHANNELS],
    /// Premultiplied accumulators `[visual, gain, gain * tof]`.
    pub carriers: [f64; 3],
    /// Transmittance after the last contribution.
    pub transmittance: f64,
    /// Blend weights `alpha_i * T_i` in compositing order.
    pub weights: Vec<f64>,
}

/// Composites a depth-sorted splat list at pixel `(row, col)`.
pub fn blend_pixel(
    sorted: &[ProjectedGaussian],
    pixel: (usize, usize),
    settings: &RenderSettings,
) -> BlendResult {
    let splats: Vec<Splat> = sorted.iter().map(|p| Splat::new(p, settings)).collect();
    let mut weights = Vec::new();
    let (x, y) = (pixel.1 as f64 + 0.5, pixel.0 as f64 + 0.5);
    let (carriers, transmittance) = composite(&splats, x, y, settings, |c| weights.push(c.a * c.t));
    BlendResult {
        channels: resolve_carriers(carriers, settings.tof_eps),
        carriers,
        transmittance,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CH_GAIN, CH_TOF, CH_VISUAL};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn splat_at(index: usize, mean: [f64; 2], sigma: f64, alpha: f64, depth: f64, v: [f64; 3]) -> ProjectedGaussian {
        let s2 = sigma * sigma;
        ProjectedGaussian {
            index,
            mean2d: mean,
            cov2d: [s2, 0.0, s2],
            conic: [1.0 / s2, 0.0, 1.0 / s2],
            depth,
            alpha,
            channel_values: v,
            clamped: 0,
        }
    }

    #[test]
    fn opaque_single_splat() {
        let s = RenderSettings { alpha_max: 1.0, ..Default::default() };
        let v = [0.3, 0.7, 0.2];
        let r = blend_pixel(&[splat_at(0, [0.5, 0.5], 1.0, 1.0, 1.0, v)], (0, 0), &s);
        assert_relative_eq!(r.channels[CH_VISUAL], 0.3);
        assert_relative_eq!(r.channels[CH_GAIN], 0.7);
        assert_relative_eq!(r.channels[CH_TOF], 0.2 * 0.7 / (0.7 + s.tof_eps));
        assert_eq!(r.transmittance, 0.0);
    }

    #[test]
    fn two_half_splats() {
        let s = RenderSettings::default();
        let (v1, v2) = ([0.2, 0.4, 0.1], [0.6, 0.8, 0.3]);
        let list = [
            splat_at(0, [0.5, 0.5], 1.0, 0.5, 1.0, v1),
            splat_at(1, [0.5, 0.5], 1.0, 0.5, 2.0, v2),
        ];
        let r = blend_pixel(&list, (0, 0), &s);
        assert_relative_eq!(r.channels[CH_VISUAL], 0.5 * 0.2 + 0.25 * 0.6, epsilon = 1e-15);
        assert_relative_eq!(r.channels[CH_GAIN], 0.5 * 0.4 + 0.25 * 0.8, epsilon = 1e-15);
        let num = 0.5 * 0.4 * 0.1 + 0.25 * 0.8 * 0.3;
        assert_relative_eq!(r.channels[CH_TOF], num / (0.4 + s.tof_eps), epsilon = 1e-12);
        assert_relative_eq!(r.transmittance, 0.25);
    }

    #[test]
    fn empty_list() {
        let r = blend_pixel(&[], (3, 4), &RenderSettings::default());
        assert_eq!(r.channels, [0.0; 3]);
        assert_eq!(r.transmittance, 1.0);
    }

    #[test]
    fn faint_and_distant_splats_skipped() {
        let s = RenderSettings::default();
        let faint = splat_at(0, [0.5, 0.5], 1.0, 0.003, 1.0, [1.0; 3]);
        let far = splat_at(1, [10.5, 0.5], 1.0, 0.9, 1.0, [1.0; 3]);
        let r = blend_pixel(&[faint, far], (0, 0), &s);
        assert!(r.weights.is_empty());
    }

    fn random_list(seeds: &[(f64, f64, f64, f64)]) -> Vec<ProjectedGaussian> {
        seeds
            .iter()
            .enumerate()
            .map(|(i, &(mx, my, sig, a))| splat_at(i, [mx, my], sig, a, i as f64, [mx / 8.0, my / 8.0, a]))
            .collect()
    }

    proptest! {
        #[test]
        fn weights_conserve_transmittance(
            seeds in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.3f64..4.0, 0.0f64..1.0), 0..40),
            row in 0usize..8, col in 0usize..8,
        ) {
            let list = random_list(&seeds);
            let r = blend_pixel(&list, (row, col), &RenderSettings::default());
            let sum: f64 = r.weights.iter().sum();
            prop_assert!(r.weights.iter().all(|w| (0.0..=1.0).contains(w)));
            prop_assert!((sum - (1.0 - r.transmittance)).abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.transmittance));
            // weights are a_i T_i with T non-increasing
            let mut t = 1.0;
            for w in &r.weights {
                let next = t - w;
                prop_assert!(next <= t + 1e-15);
                t = next;
            }
        }

        #[test]
        fn early_exit_is_faithful(
            seeds in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.3f64..4.0, 0.0f64..1.0), 0..60),
            row in 0usize..8, col in 0usize..8,
        ) {
            let list = random_list(&seeds);
            let s = RenderSettings::default();
            let exact = RenderSettings { t_stop: 0.0, ..s };
            let a = blend_pixel(&list, (row, col), &s);
            let b = blend_pixel(&list, (row, col), &exact);
            for c in 0..2 {
                prop_assert!((a.channels[c] - b.channels[c]).abs() <= 1e-3);
            }
            for c in 0..3 {
                prop_assert!((a.carriers[c] - b.carriers[c]).abs() <= 1e-3);
            }
        }

        #[test]
        fn occluder_suppresses_background(
            seeds in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.3f64..4.0, 0.0f64..1.0), 1..40),
            row in 0usize..8, col in 0usize..8,
        ) {
            let s = RenderSettings::default();
            let behind = random_list(&seeds);
            let base = blend_pixel(&behind, (row, col), &s);
            let mut front = vec![splat_at(999, [col as f64 + 0.5, row as f64 + 0.5], 2.0, 0.9995, -1.0, [0.0; 3])];
            front.extend(behind.iter().copied());
            let occ = blend_pixel(&front, (row, col), &s);
            for c in 0..2 {
                prop_assert!(occ.carriers[c] <= 1e-3 * base.carriers[c] + 1e-15);
            }
        }
    }
}
