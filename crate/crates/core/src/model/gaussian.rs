use serde::{Deserialize, Serialize};

use super::SceneMeta;
use crate::pose::{normalize_quat, quat_to_matrix};
use crate::sh::{num_coeffs, sh_eval};
use crate::{Error, Mat3, Result, Vec3, NUM_CHANNELS};

/// Channel order shared by primitives, spectra and losses.
pub const CHANNEL_LAYOUT: [&str; NUM_CHANNELS] = ["visual", "gain", "tof_norm"];

/// Offsets of each field in the flat per-primitive parameter vector.
pub const OFF_POSITION: usize = 0;
pub const OFF_LOG_SCALE: usize = 3;
pub const OFF_ROTATION: usize = 6;
pub const OFF_OPACITY: usize = 10;
pub const OFF_SH: usize = 11;

/// One explicit scene element. All stored values are unconstrained; the
/// opacity, scale and unit rotation are derived when needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrimitive {
    pub position: [f64; 3],
    /// Per-axis log standard deviation.
    pub log_scale: [f64; 3],
    /// Quaternion (w, x, y, z), normalized on use.
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    /// `NUM_CHANNELS` groups of `(L+1)^2` coefficients, channel-major.
    pub sh: Vec<f64>,
}

impl GaussianPrimitive {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> Vec3 {
        Vec3::from(self.log_scale.map(f64::exp))
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        quat_to_matrix(self.rotation)
    }

    pub fn sh_channel(&self, channel: usize) -> &[f64] {
        let k = self.sh.len() / NUM_CHANNELS;
        &self.sh[channel * k..(channel + 1) * k]
    }

    pub fn sh_channel_mut(&mut self, channel: usize) -> &mut [f64] {
        let k = self.sh.len() / NUM_CHANNELS;
        &mut self.sh[channel * k..(channel + 1) * k]
    }

    /// Raw spherical-harmonic value of a channel in direction `dir`.
    pub fn channel_value(&self, channel: usize, dir: &Vec3) -> f64 {
        sh_eval(self.sh_channel(channel), dir)
    }

    pub fn num_params(&self) -> usize {
        OFF_SH + self.sh.len()
    }

    pub fn write_params(&self, out: &mut [f64]) {
        out[OFF_POSITION..OFF_POSITION + 3].copy_from_slice(&self.position);
        out[OFF_LOG_SCALE..OFF_LOG_SCALE + 3].copy_from_slice(&self.log_scale);
        out[OFF_ROTATION..OFF_ROTATION + 4].copy_from_slice(&self.rotation);
        out[OFF_OPACITY] = self.opacity_logit;
        out[OFF_SH..OFF_SH + self.sh.len()].copy_from_slice(&self.sh);
    }

    pub fn read_params(&mut self, src: &[f64]) {
        self.position.copy_from_slice(&src[OFF_POSITION..OFF_POSITION + 3]);
        self.log_scale.copy_from_slice(&src[OFF_LOG_SCALE..OFF_LOG_SCALE + 3]);
        self.rotation.copy_from_slice(&src[OFF_ROTATION..OFF_ROTATION + 4]);
        self.opacity_logit = src[OFF_OPACITY];
        let n = self.sh.len();
        self.sh.copy_from_slice(&src[OFF_SH..OFF_SH + n]);
    }

    /// Rounds every stored value to `f32`, the on-disk precision.
    pub fn snap_to_f32(&mut self) {
        let r = |v: &mut f64| *v = *v as f32 as f64;
        self.position.iter_mut().for_each(r);
        self.log_scale.iter_mut().for_each(r);
        self.rotation.iter_mut().for_each(r);
        r(&mut self.opacity_logit);
        self.sh.iter_mut().for_each(r);
    }

    pub fn renormalize_rotation(&mut self) {
        self.rotation = normalize_quat(self.rotation);
    }
}

/// `R diag(exp(2 s)) R^T` for the primitive's rotation `R` and log-scales `s`.
pub fn covariance(g: &GaussianPrimitive) -> Mat3 {
    let r = g.rotation_matrix();
    let s2 = Mat3::from_diagonal(&Vec3::from(g.log_scale.map(|s| (2.0 * s).exp())));
    r * s2 * r.transpose()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Parameter groups that receive their own learning rate and can be frozen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Position,
    LogScale,
    Rotation,
    Opacity,
    ShVisual,
    ShGain,
    ShTof,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::Position,
        ParamGroup::LogScale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
        ParamGroup::ShVisual,
        ParamGroup::ShGain,
        ParamGroup::ShTof,
    ];

    /// Index range of this group inside the flat parameter vector.
    pub fn range(&self, sh_degree: usize) -> std::ops::Range<usize> {
        let k = num_coeffs(sh_degree);
        match self {
            ParamGroup::Position => OFF_POSITION..OFF_POSITION + 3,
            ParamGroup::LogScale => OFF_LOG_SCALE..OFF_LOG_SCALE + 3,
            ParamGroup::Rotation => OFF_ROTATION..OFF_ROTATION + 4,
            ParamGroup::Opacity => OFF_OPACITY..OFF_OPACITY + 1,
            ParamGroup::ShVisual => OFF_SH..OFF_SH + k,
            ParamGroup::ShGain => OFF_SH + k..OFF_SH + 2 * k,
            ParamGroup::ShTof => OFF_SH + 2 * k..OFF_SH + 3 * k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ParamGroup::Position => "position",
            ParamGroup::LogScale => "log_scale",
            ParamGroup::Rotation => "rotation",
            ParamGroup::Opacity => "opacity_logit",
            ParamGroup::ShVisual => "sh_visual",
            ParamGroup::ShGain => "sh_gain",
            ParamGroup::ShTof => "sh_tof",
        }
    }
}

/// A radio radiance field: Gaussian primitives sharing one SH degree.
#[derive(Clone, Debug, PartialEq)]
pub struct RrfModel {
    pub gaussians: Vec<GaussianPrimitive>,
    pub sh_degree: usize,
    pub meta: SceneMeta,
}

impl RrfModel {
    pub fn empty(sh_degree: usize, meta: SceneMeta) -> Self {
        Self {
            gaussians: Vec::new(),
            sh_degree,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn coeffs_per_channel(&self) -> usize {
        num_coeffs(self.sh_degree)
    }

    /// Length of one primitive's flat parameter vector.
    pub fn params_per_primitive(&self) -> usize {
        OFF_SH + NUM_CHANNELS * self.coeffs_per_channel()
    }

    /// A fresh primitive with every channel constant in direction.
    pub fn primitive(
        &self,
        position: Vec3,
        log_scale: [f64; 3],
        rotation: [f64; 4],
        opacity_logit: f64,
        channel_values: [f64; NUM_CHANNELS],
    ) -> GaussianPrimitive {
        let k = self.coeffs_per_channel();
        let mut sh = vec![0.0; NUM_CHANNELS * k];
        for (c, v) in channel_values.iter().enumerate() {
            sh[c * k] = v / crate::sh::Y00;
        }
        GaussianPrimitive {
            position: position.into(),
            log_scale,
            rotation,
            opacity_logit,
            sh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > crate::sh::MAX_DEGREE {
            return Err(Error::InvalidArgument(format!("SH degree {} > 3", self.sh_degree)));
        }
        let n = NUM_CHANNELS * self.coeffs_per_channel();
        for (i, g) in self.gaussians.iter().enumerate() {
            if g.sh.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "primitive {i} has {} SH coefficients, expected {n}",
                    g.sh.len()
                )));
            }
        }
        Ok(())
    }

    pub fn snap_to_f32(&mut self) {
        self.gaussians.iter_mut().for_each(GaussianPrimitive::snap_to_f32);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn prim(log_scale: [f64; 3], rotation: [f64; 4]) -> GaussianPrimitive {
        GaussianPrimitive {
            position: [0.0; 3],
            log_scale,
            rotation,
            opacity_logit: 0.0,
            sh: vec![0.0; 3],
        }
    }

    #[test]
    fn covariance_examples() {
        assert_abs_diff_eq!(covariance(&prim([0.0; 3], [1.0, 0.0, 0.0, 0.0])), Mat3::identity());
        let c = covariance(&prim([2f64.ln(), 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]));
        assert_abs_diff_eq!(c, Mat3::from_diagonal(&Vec3::new(4.0, 1.0, 1.0)), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn covariance_is_spd_with_scale_eigenvalues(
            s in prop::array::uniform3(-3.0f64..1.0),
            q in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let c = covariance(&prim(s, q));
            prop_assert!((c - c.transpose()).abs().max() <= 1e-12 * c.abs().max());
            let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let mut expect: Vec<f64> = s.iter().map(|v| (2.0 * v).exp()).collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in eig.iter().zip(&expect) {
                prop_assert!(*a > 0.0);
                prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
            }
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let g = GaussianPrimitive {
            position: [1.0, 2.0, 3.0],
            log_scale: [-1.0, -2.0, -3.0],
            rotation: [0.5, 0.5, 0.5, 0.5],
            opacity_logit: 0.25,
            sh: (0..27).map(|i| i as f64).collect(),
        };
        let mut buf = vec![0.0; g.num_params()];
        g.write_params(&mut buf);
        let mut h = g.clone();
        h.sh.iter_mut().for_each(|v| *v = 0.0);
        h.read_params(&buf);
        assert_eq!(g, h);
        assert_eq!(ParamGroup::ShTof.range(2), 29..38);
    }
}
