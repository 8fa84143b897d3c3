use serde::{Deserialize, Serialize};

use super::{array_gain, extract_mpcs, matched_beam, ArrayGeometry};
use crate::error::{Error, Result};
use crate::model::RrfModel;
use crate::oracle::{trace_paths, MultipathComponent, Scene};
use crate::pose::direction_to_angles;
use crate::raster::render_panorama;
use crate::spectrum::{Projection, RadioSpatialSpectrum};
use crate::RxPose;

/// Settings of an MPC query on a rendered panorama.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    /// Panorama height; the width is twice this.
    pub height: usize,
    pub k: usize,
    /// Minimum peak gain in normalized spectrum units.
    pub min_gain: f64,
    /// Suppression radius in pixel pitches.
    pub nms_radius: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            height: 128,
            k: 5,
            min_gain: 1e-3,
            nms_radius: 2.0,
        }
    }
}

/// One path as reported in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcEntry {
    /// World-frame unit arrival direction.
    pub aoa: [f64; 3],
    /// Arrival azimuth and elevation in the receiver frame, degrees.
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aod: Option<[f64; 3]>,
    pub gain: f64,
    pub gain_db: f64,
    pub tof_ns: f64,
    /// `|w^H a(aoa)|^2` of the beam toward the strongest path.
    pub array_gain: f64,
    pub array_gain_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub paths: Vec<MpcEntry>,
    /// Gain of the rendered-MPC beam evaluated on the strongest traced path.
    pub achieved_gain: f64,
    /// Gain of a beam matched to the strongest traced path (the array size).
    pub matched_gain: f64,
    pub gain_ratio: f64,
    /// Angle between the rendered and traced strongest arrivals, degrees.
    pub aoa_error_deg: f64,
    pub tof_error_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformReport {
    pub pose: RxPose,
    pub array: ArrayGeometry,
    pub elements: usize,
    pub mpcs: Vec<MpcEntry>,
    /// Array gain toward the strongest MPC with its own matched beam.
    pub achieved_gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
}

fn db(v: f64) -> f64 {
    if v > 0.0 {
        20.0 * v.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn entry(
    m: &MultipathComponent,
    pose: &RxPose,
    arr: &ArrayGeometry,
    beam: &[num_complex::Complex64],
    wavelength: f64,
) -> MpcEntry {
    let local = pose.rotation().transpose() * m.aoa();
    let (az, el) = direction_to_angles(&local);
    let g = array_gain(arr, beam, &local, wavelength);
    MpcEntry {
        aoa: m.aoa,
        azimuth_deg: az.to_degrees(),
        elevation_deg: el.to_degrees(),
        aod: m.aod,
        gain: m.gain,
        gain_db: db(m.gain),
        tof_ns: m.tof * 1e9,
        array_gain: g,
        array_gain_db: 10.0 * g.log10(),
    }
}

/// Dominant MPCs of the panorama rendered at `pose`.
pub fn query_mpcs(model: &RrfModel, pose: &RxPose, cfg: &QueryConfig) -> Result<Vec<MultipathComponent>> {
    let spec = render_panorama(model, pose, cfg.height)?;
    extract_mpcs(&spec, &model.meta, cfg.k, cfg.min_gain, cfg.nms_radius)
}

/// Matched single-path beam toward the strongest rendered MPC.
///
/// When `oracle` is given, the same beam is evaluated on the strongest path
/// traced in that scene and compared with a beam matched to it.
pub fn beamform_report(
    model: &RrfModel,
    pose: &RxPose,
    arr: &ArrayGeometry,
    cfg: &QueryConfig,
    oracle: Option<(&Scene, usize)>,
) -> Result<BeamformReport> {
    arr.validate()?;
    let mpcs = query_mpcs(model, pose, cfg)?;
    let Some(first) = mpcs.first() else {
        return Err(Error::NoPaths);
    };
    let wavelength = model.meta.wavelength();
    let to_local = pose.rotation().transpose();
    let beam = matched_beam(arr, &(to_local * first.aoa()), wavelength);
    let entries: Vec<MpcEntry> = mpcs.iter().map(|m| entry(m, pose, arr, &beam, wavelength)).collect();
    let achieved_gain = entries[0].array_gain;
    let oracle = match oracle {
        None => None,
        Some((scene, order)) => {
            let paths = trace_paths(scene, &pose.position(), order)?;
            let best = paths.first().ok_or(Error::NoPaths)?;
            let best_local = to_local * best.aoa();
            let matched = matched_beam(arr, &best_local, wavelength);
            let achieved = array_gain(arr, &beam, &best_local, wavelength);
            let matched_gain = array_gain(arr, &matched, &best_local, wavelength);
            Some(OracleComparison {
                paths: paths.iter().map(|m| entry(m, pose, arr, &beam, wavelength)).collect(),
                achieved_gain: achieved,
                matched_gain,
                gain_ratio: achieved / matched_gain,
                aoa_error_deg: first.aoa().dot(&best.aoa()).clamp(-1.0, 1.0).acos().to_degrees(),
                tof_error_ns: (first.tof - best.tof).abs() * 1e9,
            })
        }
    };
    Ok(BeamformReport {
        pose: *pose,
        array: *arr,
        elements: arr.len(),
        mpcs: entries,
        achieved_gain,
        oracle,
    })
}

/// Incident spectrum at a reconfigurable surface: the panorama rendered at
/// `ris_pose`, tagged as an incident query.
pub fn ris_incident_query(model: &RrfModel, ris_pose: &RxPose, height: usize) -> Result<RadioSpatialSpectrum> {
    let mut spec = render_panorama(model, ris_pose, height)?;
    spec.projection = Projection::RisIncident;
    Ok(spec)
}

