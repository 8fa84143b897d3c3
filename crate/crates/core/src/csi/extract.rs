use crate::error::{Error, Result};
use crate::model::SceneMeta;
use crate::oracle::MultipathComponent;
use crate::spectrum::{equirect_direction, RadioSpatialSpectrum};
use crate::{CH_GAIN, CH_TOF};

/// Dominant multipath components of an equirectangular spectrum.
///
/// Candidates are pixels whose gain is at least every 8-neighbour's
/// (azimuth wraps around) and above `min_gain`, in the spectrum's
/// normalized gain units. Greedy non-maximum suppression then drops any
/// candidate within `nms_radius` pixel pitches (great-circle) of a stronger
/// accepted one. Each survivor reports the gain-weighted mean of the
/// pixel-centre directions in its 3x3 neighbourhood (world frame), the peak
/// gain times `g_ref` and the peak ToF times `tau_max`; the departure angle
/// is left unset. An isolated single-pixel peak reports its pixel centre. At most `k` components are
/// returned, strongest first.
pub fn extract_mpcs(
    spec: &RadioSpatialSpectrum,
    meta: &SceneMeta,
    k: usize,
    min_gain: f64,
    nms_radius: f64,
) -> Result<Vec<MultipathComponent>> {
    if !spec.projection.is_equirect() {
        return Err(Error::InvalidArgument("MPC extraction needs an equirectangular spectrum".into()));
    }
    if spec.channels <= CH_TOF {
        return Err(Error::InvalidArgument("spectrum lacks gain and ToF channels".into()));
    }
    let (h, w) = (spec.height, spec.width);
    let gain = spec.plane(CH_GAIN);
    let at = |r: usize, c: usize| gain[r * w + c];
    let mut candidates = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = at(r, c);
            if !(v as f64 > min_gain) || v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'n: for dr in [-1isize, 0, 1] {
                let rr = r as isize + dr;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for dc in [w - 1, 0, 1] {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    if at(rr as usize, (c + dc) % w) > v {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                candidates.push((v, r, c));
            }
        }
    }
    // strongest first, ties in raster order
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let limit = nms_radius * spec.pixel_pitch();
    let rot = spec.pose.rotation();
    let mut dirs: Vec<crate::Vec3> = Vec::new();
    let mut out = Vec::new();
    for (v, r, c) in candidates {
        if out.len() >= k {
            break;
        }
        let local = equirect_direction(r as f64, c as f64, h, w);
        if dirs.iter().any(|d| d.dot(&local).clamp(-1.0, 1.0).acos() <= limit) {
            continue;
        }
        dirs.push(local);
        let aoa = rot * refine(gain, r, c, h, w);
        out.push(MultipathComponent {
            aoa: [aoa.x, aoa.y, aoa.z],
            aod: None,
            gain: v as f64 * meta.g_ref,
            tof: spec.get(CH_TOF, r, c) as f64 * meta.tau_max,
            order: 0,
            bounces: Vec::new(),
        });
    }
    Ok(out)
}

/// Gain-weighted mean direction of the 3x3 neighbourhood of `(r, c)`.
fn refine(gain: &[f32], r: usize, c: usize, h: usize, w: usize) -> crate::Vec3 {
    let mut sum = crate::Vec3::zeros();
    for rr in r.saturating_sub(1)..(r + 2).min(h) {
        for dc in [w - 1, 0, 1] {
            let cc = (c + dc) % w;
            let g = gain[rr * w + cc].max(0.0) as f64;
            if g > 0.0 {
                sum += equirect_direction(rr as f64, cc as f64, h, w) * g;
            }
        }
    }
    sum.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{splat_oracle_spectrum, trace_paths, Scene};
    use crate::spectrum::Projection;
    use crate::{RxPose, Vec3};

    fn pose() -> RxPose {
        RxPose::from_yaw(Vec3::new(3.0, 2.5, 1.2), 0.4)
    }

    #[test]
    fn zero_spectrum_is_empty() {
        let s = RadioSpatialSpectrum::zeros(32, 64, pose(), Projection::Equirect);
        let meta = Scene::reference_box().meta();
        assert!(extract_mpcs(&s, &meta, 5, 0.0, 2.0).unwrap().is_empty());
    }

    #[test]
    fn single_los() {
        let scene = Scene::reference_box();
        let meta = scene.meta();
        let p = pose();
        let paths = trace_paths(&scene, &p.position(), 0).unwrap();
        let s = splat_oracle_spectrum(&paths, &p, (64, 128), &meta).unwrap();
        let mpcs = extract_mpcs(&s, &meta, 10, 0.0, 2.0).unwrap();
        assert_eq!(mpcs.len(), 1);
        let err = mpcs[0].aoa().dot(&paths[0].aoa()).clamp(-1.0, 1.0).acos();
        assert!(err <= s.pixel_pitch(), "{err}");
        assert!((mpcs[0].gain / paths[0].gain - 1.0).abs() < 1e-6);
        assert!(mpcs[0].aod.is_none());
    }

    #[test]
    fn close_equal_peaks_merge() {
        let mut s = RadioSpatialSpectrum::zeros(32, 64, pose(), Projection::Equirect);
        let n = 32 * 64;
        s.data[n + 16 * 64 + 20] = 1.0;
        s.data[n + 16 * 64 + 22] = 1.0;
        let meta = Scene::reference_box().meta();
        assert_eq!(extract_mpcs(&s, &meta, 5, 0.0, 3.0).unwrap().len(), 1);
        assert_eq!(extract_mpcs(&s, &meta, 5, 0.0, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn refinement_centres_between_equal_neighbours() {
        let mut s = RadioSpatialSpectrum::zeros(32, 64, pose(), Projection::Equirect);
        let n = 32 * 64;
        s.data[n + 16 * 64 + 20] = 1.0;
        s.data[n + 16 * 64 + 21] = 1.0;
        let meta = Scene::reference_box().meta();
        let m = extract_mpcs(&s, &meta, 5, 0.0, 2.0).unwrap();
        assert_eq!(m.len(), 1);
        let local = s.pose.rotation().transpose() * m[0].aoa();
        let mid = equirect_direction(16.0, 20.5, 32, 64);
        assert!((local.y.atan2(local.x) - mid.y.atan2(mid.x)).abs() < 1e-12);
        // averaging unit vectors pulls the elevation slightly toward the equator
        let pitch = std::f64::consts::PI / 32.0;
        assert!(local.dot(&mid).clamp(-1.0, 1.0).acos() < 0.01 * pitch);
    }

    #[test]
    fn azimuth_wraps() {
        let mut s = RadioSpatialSpectrum::zeros(32, 64, pose(), Projection::Equirect);
        let n = 32 * 64;
        s.data[n + 10 * 64 + 63] = 1.0;
        s.data[n + 10 * 64] = 0.5;
        let meta = Scene::reference_box().meta();
        let m = extract_mpcs(&s, &meta, 5, 0.0, 0.5).unwrap();
        assert_eq!(m.len(), 1);
    }
}
