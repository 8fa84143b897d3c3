use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrf::csi::extract_mpcs;
use rrf::model::logit;
use rrf::oracle::{splat_oracle_spectrum, trace_paths};
use rrf::raster::render_panorama;
use rrf::spectrum::equirect_pixel;
use rrf::{MultipathComponent, RrfModel, RxPose, Scene, Vec3, CH_GAIN, SPEED_OF_LIGHT};

const H: usize = 128;
const NMS_RADIUS: f64 = 2.0;

fn angle(a: &Vec3, b: &Vec3) -> f64 {
    a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos()
}

fn random_pose(scene: &Scene, rng: &mut ChaCha8Rng) -> RxPose {
    let lo = Vec3::from(scene.aabb.min);
    let hi = Vec3::from(scene.aabb.max);
    loop {
        let p = Vec3::from_fn(|i, _| rng.gen_range(lo[i] + 0.3..hi[i] - 0.3));
        if (p - scene.tx()).norm() > 0.3 {
            return RxPose::from_yaw(p, rng.gen_range(-3.0..3.0)).snapped();
        }
    }
}

/// Smallest angle between path `i` and any other path.
fn isolation(paths: &[MultipathComponent], i: usize) -> f64 {
    paths
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, p)| angle(&p.aoa(), &paths[i].aoa()))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn extraction_recovers_separated_traced_paths() {
    let scene = Scene::reference_box();
    let meta = scene.meta();
    let pitch = std::f64::consts::PI / H as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..40 {
        let pose = random_pose(&scene, &mut rng);
        let paths = trace_paths(&scene, &pose.position(), 1).unwrap();
        let spec = splat_oracle_spectrum(&paths, &pose, (H, 2 * H), &meta).unwrap();
        let found = extract_mpcs(&spec, &meta, 64, 0.0, NMS_RADIUS).unwrap();
        let separated: Vec<usize> =
            (0..paths.len()).filter(|&i| isolation(&paths, i) > 2.0 * NMS_RADIUS * pitch).collect();
        if separated.len() == paths.len() {
            assert_eq!(found.len(), paths.len(), "path count at {:?}", pose.position);
        }
        for &i in &separated {
            let p = &paths[i];
            let best = found
                .iter()
                .min_by(|a, b| angle(&a.aoa(), &p.aoa()).total_cmp(&angle(&b.aoa(), &p.aoa())))
                .expect("at least one component");
            assert!(angle(&best.aoa(), &p.aoa()) <= pitch, "AoA error above one pitch");
            assert!((best.gain - p.gain).abs() <= 1e-6 * p.gain, "gain {} vs {}", best.gain, p.gain);
            checked += 1;
        }
    }
    assert!(checked > 150, "only {checked} separated paths checked");
}

/// One isotropic, near-opaque primitive at the last interaction point of
/// every path, six pixel pitches wide as seen from the receiver. Smaller
/// splats lose more than 5% of their peak to the opacity rescale that
/// compensates the screen-space blur floor.
fn model_from_paths(scene: &Scene, paths: &[MultipathComponent], rx: &Vec3, pitch: f64) -> RrfModel {
    let meta = scene.meta();
    let mut model = RrfModel::empty(0, meta);
    for p in paths {
        let hit = p.bounces.last().map_or(scene.tx(), |b| Vec3::from(*b));
        let range = (hit - rx).norm();
        let sigma = 6.0 * pitch * range;
        let tof = p.tof / meta.tau_max - range / (SPEED_OF_LIGHT * meta.tau_max);
        let g = model.primitive(
            hit,
            [sigma.ln(); 3],
            [1.0, 0.0, 0.0, 0.0],
            logit(0.995),
            [0.0, p.gain / meta.g_ref, tof],
        );
        model.gaussians.push(g);
    }
    model.snap_to_f32();
    model
}

#[test]
fn rendered_surface_hits_match_oracle_peaks() {
    let scene = Scene::reference_box();
    let meta = scene.meta();
    let pitch = std::f64::consts::PI / H as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..12 {
        let pose = random_pose(&scene, &mut rng);
        let rx = pose.position();
        let paths = trace_paths(&scene, &rx, 1).unwrap();
        let oracle = splat_oracle_spectrum(&paths, &pose, (H, 2 * H), &meta).unwrap();
        let model = model_from_paths(&scene, &paths, &rx, pitch);
        let rendered = render_panorama(&model, &pose, H).unwrap();
        let to_local = pose.rotation().transpose();
        for (i, p) in paths.iter().enumerate() {
            // A splat reaches about 3 sigma (18 pitches) and further near
            // cube-face edges, where the screen-space linearization stretches.
            if isolation(&paths, i) < 30.0 * pitch {
                continue;
            }
            let (r0, c0) = equirect_pixel(&(to_local * p.aoa()), H, 2 * H);
            let expect = oracle.get(CH_GAIN, r0, c0) as f64;
            // Rendered peak: maximum over a window wider than the splat.
            let mut best = (f64::NEG_INFINITY, 0isize, 0isize);
            for dr in -6isize..=6 {
                for dc in -6isize..=6 {
                    let r = r0 as isize + dr;
                    if r < 0 || r >= H as isize {
                        continue;
                    }
                    let c = (c0 as isize + dc).rem_euclid(2 * H as isize) as usize;
                    let v = rendered.get(CH_GAIN, r as usize, c) as f64;
                    if v > best.0 {
                        best = (v, dr, dc);
                    }
                }
            }
            assert!(best.1.abs() <= 1 && best.2.abs() <= 1, "peak moved by ({}, {})", best.1, best.2);
            assert!((best.0 - expect).abs() <= 0.05 * expect, "peak {} vs oracle {}", best.0, expect);
            checked += 1;
        }
    }
    assert!(checked >= 30, "only {checked} peaks checked");
}
