//! Synthetic training data: receiver poses, oracle radio spectra, visual
//! targets and the JSON manifest tying them together.
//!
//! Visual targets come from a fixed reference rendering of the scene: every
//! facet is tiled with flat, nearly opaque Gaussians whose brightness is a
//! per-facet albedo modulated by a checkerboard, rendered through the same
//! rasterizer as the trained model.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_spectrum, write_json, write_spectrum};
use crate::model::{logit, RrfModel};
use crate::oracle::{splat_oracle_spectrum, trace_paths, Scene};
use crate::pose::matrix_to_quat;
use crate::raster::{render_view_image, PinholeCamera, RenderSettings};
use crate::spectrum::{ChannelImage, Projection, RadioSpatialSpectrum};
use crate::train::{RadioSample, VisualSample};
use crate::{par, Mat3, RxPose, Vec3, NUM_CHANNELS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENE_FILE: &str = "scene.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Position then quaternion (w, x, y, z).
    pub pose: [f32; 7],
    pub spectrum: String,
    pub visual: Option<String>,
    pub split: Split,
}

impl Record {
    pub fn pose(&self) -> RxPose {
        RxPose::from_f32_array(self.pose)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scene: String,
    /// Radio spectrum height and width.
    pub resolution: [usize; 2],
    pub visual_resolution: usize,
    pub visual_fov_deg: f64,
    pub channel_layout: Vec<String>,
    pub carrier_freq: f64,
    pub tau_max: f64,
    pub g_ref: f64,
    pub max_order: usize,
    pub seed: u64,
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Radio spectrum height; the width is twice this.
    pub height: usize,
    pub max_order: usize,
    pub seed: u64,
    pub visual_resolution: usize,
    pub visual_fov_deg: f64,
    /// Minimum distance of every pose from facets and the transmitter.
    pub margin: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 30,
            height: 128,
            max_order: 1,
            seed: 0,
            visual_resolution: 64,
            visual_fov_deg: 90.0,
            margin: 0.2,
        }
    }
}

/// Grid spacing of the reference visual tiling, metres.
const TILE_SPACING: f64 = 0.1;
const CHECKER_SIZE: f64 = 0.5;

/// Standard deviation of the blob that shows the transmitter, metres.
const TX_DEVICE_SIGMA: f64 = 0.06;
const TX_DEVICE_SHADE: f64 = 0.95;

/// Flat Gaussians tiling every facet with a per-facet albedo and a
/// checkerboard modulation, plus a bright blob at the transmitter so the
/// device is visible in the images like any other object in the room.
pub fn reference_visual_model(scene: &Scene) -> RrfModel {
    let mut model = RrfModel::empty(0, scene.meta());
    for (fi, f) in scene.facets.iter().enumerate() {
        let v: Vec<Vec3> = (0..4).map(|i| f.vertex(i)).collect();
        let (eu, ev) = (v[1] - v[0], v[3] - v[0]);
        let nu = (eu.norm() / TILE_SPACING).ceil().max(1.0) as usize;
        let nv = (ev.norm() / TILE_SPACING).ceil().max(1.0) as usize;
        let n = f.normal();
        let u = eu.normalize();
        let w = n.cross(&u);
        let rot = matrix_to_quat(&Mat3::from_columns(&[u, w, n]));
        let su = eu.norm() / nu as f64;
        let sv = ev.norm() / nv as f64;
        let albedo = 0.3 + 0.5 * ((fi as f64 + 1.0) * 0.618_033_988_75).fract();
        for a in 0..nu {
            for b in 0..nv {
                let (s, t) = ((a as f64 + 0.5) / nu as f64, (b as f64 + 0.5) / nv as f64);
                let p = v[0] * ((1.0 - s) * (1.0 - t)) + v[1] * (s * (1.0 - t)) + v[2] * (s * t) + v[3] * ((1.0 - s) * t);
                let cell = ((s * eu.norm() / CHECKER_SIZE).floor() + (t * ev.norm() / CHECKER_SIZE).floor()) as i64;
                let shade = if cell.rem_euclid(2) == 0 { 1.15 } else { 0.85 };
                let value = (albedo * shade).clamp(0.0, 1.0);
                let log_scale = [(0.6 * su).ln(), (0.6 * sv).ln(), (0.1 * TILE_SPACING).ln()];
                let mut g = model.primitive(p, log_scale, rot, logit(0.99), [value, 0.0, 0.0]);
                g.snap_to_f32();
                model.gaussians.push(g);
            }
        }
    }
    let mut tx = model.primitive(
        scene.tx(),
        [TX_DEVICE_SIGMA.ln(); 3],
        [1.0, 0.0, 0.0, 0.0],
        logit(0.99),
        [TX_DEVICE_SHADE, 0.0, 0.0],
    );
    tx.snap_to_f32();
    model.gaussians.push(tx);
    model
}

/// Poses uniform in the scene bounds at least `margin` from every facet and
/// from the transmitter, with uniform yaw.
pub fn sample_poses(scene: &Scene, n: usize, margin: f64, rng: &mut ChaCha8Rng) -> Result<Vec<RxPose>> {
    let lo = Vec3::from(scene.aabb.min);
    let ext = scene.aabb.extent();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 1) {
            return Err(Error::InvalidScene("no free space for receiver poses".into()));
        }
        let p = lo + ext.component_mul(&Vec3::new(rng.gen(), rng.gen(), rng.gen()));
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pose = RxPose::from_yaw(p, yaw).snapped();
        let q = pose.position();
        if !scene.aabb.contains_strict(&q)
            || (q - scene.tx()).norm() < margin
            || scene.facets.iter().any(|f| f.distance_to(&q) < margin)
        {
            continue;
        }
        out.push(pose);
    }
    Ok(out)
}

/// Camera used for the visual target of a pose.
pub fn visual_camera(pose: &RxPose, fov_deg: f64, resolution: usize) -> PinholeCamera {
    PinholeCamera::along_pose(pose, fov_deg.to_radians(), resolution)
}

/// Writes a dataset into `dir`: `scene.json`, `manifest.json`, and one
/// radio spectrum plus one visual target per pose.
pub fn gen_dataset(scene: &Scene, dir: &Path, cfg: &GenConfig) -> Result<DatasetManifest> {
    scene.validate()?;
    if cfg.n_train + cfg.n_test == 0 {
        return Err(Error::InvalidArgument("dataset needs at least one pose".into()));
    }
    if cfg.height == 0 || cfg.visual_resolution == 0 {
        return Err(Error::InvalidArgument("resolutions must be positive".into()));
    }
    for sub in ["spectra", "visual"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let poses = sample_poses(scene, cfg.n_train + cfg.n_test, cfg.margin, &mut rng)?;
    let reference = reference_visual_model(scene);
    let meta = scene.meta();
    let settings = RenderSettings::default();
    let records = par::map_range(poses.len(), |i| -> Result<Record> {
        let (split, name) = if i < cfg.n_train {
            (Split::Train, format!("train_{i:04}"))
        } else {
            (Split::Test, format!("test_{:04}", i - cfg.n_train))
        };
        let pose = poses[i];
        let paths = trace_paths(scene, &pose.position(), cfg.max_order)?;
        let spec = splat_oracle_spectrum(&paths, &pose, (cfg.height, 2 * cfg.height), &meta)?;
        let spec_rel = format!("spectra/{name}.rrfs");
        write_spectrum(&dir.join(&spec_rel), &spec)?;
        let cam = visual_camera(&pose, cfg.visual_fov_deg, cfg.visual_resolution);
        let img = render_view_image(&reference, &cam, &settings);
        let vis = RadioSpatialSpectrum::from_image(&img, pose, Projection::pinhole(cam.fov, None));
        let vis_rel = format!("visual/{name}.rrfs");
        write_spectrum(&dir.join(&vis_rel), &vis)?;
        Ok(Record {
            pose: pose.to_f32_array(),
            spectrum: spec_rel,
            visual: Some(vis_rel),
            split,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    scene.save(dir.join(SCENE_FILE))?;
    let manifest = DatasetManifest {
        scene: SCENE_FILE.into(),
        resolution: [cfg.height, 2 * cfg.height],
        visual_resolution: cfg.visual_resolution,
        visual_fov_deg: cfg.visual_fov_deg,
        channel_layout: crate::model::CHANNEL_LAYOUT.iter().map(|s| s.to_string()).collect(),
        carrier_freq: scene.carrier_freq,
        tau_max: scene.tau_max,
        g_ref: scene.g_ref,
        max_order: cfg.max_order,
        seed: cfg.seed,
        records,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A loaded dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub scene: Scene,
}

impl Dataset {
    /// Reads and validates the manifest: every file must exist and parse
    /// with the declared resolution.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        let scene = Scene::load(dir.join(&manifest.scene))?;
        let ds = Self {
            dir: dir.to_path_buf(),
            manifest,
            scene,
        };
        for r in &ds.manifest.records {
            let s = ds.spectrum(r)?;
            if [s.height, s.width] != ds.manifest.resolution || s.channels != NUM_CHANNELS {
                return Err(Error::Format(format!("{} has mismatched resolution", r.spectrum)));
            }
            if let Some(v) = &r.visual {
                let s = read_spectrum(&dir.join(v))?;
                let n = ds.manifest.visual_resolution;
                if s.height != n || s.width != n {
                    return Err(Error::Format(format!("{v} has mismatched resolution")));
                }
            }
        }
        Ok(ds)
    }

    pub fn spectrum(&self, r: &Record) -> Result<RadioSpatialSpectrum> {
        read_spectrum(&self.dir.join(&r.spectrum))
    }

    pub fn records(&self, split: Split) -> Vec<&Record> {
        self.manifest.split(split).collect()
    }

    pub fn radio_samples(&self, split: Split) -> Result<Vec<RadioSample>> {
        self.manifest
            .split(split)
            .map(|r| {
                Ok(RadioSample {
                    pose: r.pose(),
                    target: self.spectrum(r)?.to_image(),
                })
            })
            .collect()
    }

    pub fn visual_samples(&self, split: Split) -> Result<Vec<VisualSample>> {
        let m = &self.manifest;
        self.manifest
            .split(split)
            .filter_map(|r| r.visual.as_ref().map(|v| (r, v)))
            .map(|(r, v)| {
                let target: ChannelImage = read_spectrum(&self.dir.join(v))?.to_image();
                Ok(VisualSample {
                    camera: visual_camera(&r.pose(), m.visual_fov_deg, m.visual_resolution),
                    target,
                })
            })
            .collect()
    }
}
