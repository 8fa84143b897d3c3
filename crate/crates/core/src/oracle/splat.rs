use super::{MultipathComponent, SceneMeta};
use crate::spectrum::equirect_pixel;
use crate::{
    Error, Projection, RadioSpatialSpectrum, Result, RxPose, CH_GAIN, CH_TOF,
};

/// Drops each path into the equirectangular bin of its arrival direction.
///
/// The gain channel sums normalized amplitudes per pixel; the ToF channel
/// holds the gain-weighted mean of `tof / tau_max` (0 where no path lands).
/// The visual channel is left at 0.
pub fn splat_oracle_spectrum(
    mpcs: &[MultipathComponent],
    pose: &RxPose,
    resolution: (usize, usize),
    meta: &SceneMeta,
) -> Result<RadioSpatialSpectrum> {
    let (h, w) = resolution;
    if h == 0 || w != 2 * h {
        return Err(Error::InvalidArgument(format!(
            "equirectangular resolution must be H x 2H, got {h} x {w}"
        )));
    }
    let rot_t = pose.rotation().transpose();
    let n = h * w;
    let mut gain = vec![0.0f64; n];
    let mut weighted_tof = vec![0.0f64; n];
    for m in mpcs {
        let (row, col) = equirect_pixel(&(rot_t * m.aoa()), h, w);
        let g = m.gain / meta.g_ref;
        gain[row * w + col] += g;
        weighted_tof[row * w + col] += g * (m.tof / meta.tau_max);
    }
    let mut out = RadioSpatialSpectrum::zeros(h, w, *pose, Projection::Equirect);
    for i in 0..n {
        if gain[i] > 0.0 {
            out.data[CH_GAIN * n + i] = gain[i] as f32;
            out.data[CH_TOF * n + i] = (weighted_tof[i] / gain[i]) as f32;
        }
    }
    Ok(out)
}
