use serde::{Deserialize, Serialize};

use super::{Facet, Scene};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// Highest reflection order supported by [`trace_paths`].
pub const MAX_ORDER: usize = 2;

/// Relative margin at segment endpoints for intersection tests.
const SEGMENT_EPS: f64 = 1e-9;

/// One propagation path from the transmitter to the receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathComponent {
    /// Unit direction at the receiver pointing toward the last interaction
    /// (or the transmitter for line of sight), world frame.
    pub aoa: [f64; 3],
    /// Unit departure direction at the transmitter; absent when the path was
    /// recovered from a rendered spectrum.
    pub aod: Option<[f64; 3]>,
    /// Linear field amplitude.
    pub gain: f64,
    /// Seconds.
    pub tof: f64,
    pub order: u32,
    /// Reflection points from transmitter to receiver.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounces: Vec<[f64; 3]>,
}

impl MultipathComponent {
    pub fn aoa(&self) -> Vec3 {
        Vec3::from(self.aoa)
    }

    pub fn aod(&self) -> Option<Vec3> {
        self.aod.map(Vec3::from)
    }

    pub fn path_length(&self) -> f64 {
        self.tof * SPEED_OF_LIGHT
    }
}

/// Reflection of `p` across the infinite plane of `facet`.
pub fn mirror_point(p: &Vec3, facet: &Facet) -> Vec3 {
    let n = facet.normal();
    p - n * (2.0 * facet.plane_distance(p))
}

/// True when any facet outside `exclude` crosses the open segment `a -> b`.
pub fn occlusion_test(a: &Vec3, b: &Vec3, scene: &Scene, exclude: &[usize]) -> bool {
    scene.facets.iter().enumerate().any(|(i, f)| {
        if exclude.contains(&i) {
            return false;
        }
        match f.line_parameter(a, b) {
            Some(t) if t > SEGMENT_EPS && t < 1.0 - SEGMENT_EPS => f.contains(&(a + (b - a) * t)),
            _ => false,
        }
    })
}

/// Point where segment `a -> b` crosses `facet`, strictly between the
/// endpoints and inside the quad.
fn bounce_point(a: &Vec3, b: &Vec3, facet: &Facet) -> Option<Vec3> {
    let t = facet.line_parameter(a, b)?;
    if t <= SEGMENT_EPS || t >= 1.0 - SEGMENT_EPS {
        return None;
    }
    let p = a + (b - a) * t;
    facet.contains(&p).then_some(p)
}

/// Enumerates line-of-sight and specular reflection paths up to `max_order`
/// bounces, sorted by descending gain.
pub fn trace_paths(scene: &Scene, rx: &Vec3, max_order: usize) -> Result<Vec<MultipathComponent>> {
    if max_order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "max_order {max_order} exceeds {MAX_ORDER}"
        )));
    }
    let tx = scene.tx();
    if (rx - tx).norm() < 1e-6 {
        return Err(Error::InvalidArgument("receiver coincides with transmitter".into()));
    }
    if !scene.aabb.contains_strict(rx) {
        return Err(Error::InvalidArgument("receiver outside the scene bounds".into()));
    }
    let lambda = scene.wavelength();
    let friis = |len: f64| lambda / (4.0 * std::f64::consts::PI * len);
    let mut paths = Vec::new();

    let make = |bounces: Vec<Vec3>, length: f64, loss: f64| -> MultipathComponent {
        let last = bounces.last().copied().unwrap_or(tx);
        let first = bounces.first().copied().unwrap_or(*rx);
        let aoa = (last - rx).normalize();
        let aod = (first - tx).normalize();
        MultipathComponent {
            aoa: aoa.into(),
            aod: Some(aod.into()),
            gain: friis(length) * loss,
            tof: length / SPEED_OF_LIGHT,
            order: bounces.len() as u32,
            bounces: bounces.iter().map(|b| (*b).into()).collect(),
        }
    };

    if !occlusion_test(&tx, rx, scene, &[]) {
        paths.push(make(Vec::new(), (rx - tx).norm(), 1.0));
    }

    if max_order >= 1 {
        for (i, f) in scene.facets.iter().enumerate() {
            let image = mirror_point(&tx, f);
            let Some(b) = bounce_point(&image, rx, f) else {
                continue;
            };
            if occlusion_test(&tx, &b, scene, &[i]) || occlusion_test(&b, rx, scene, &[i]) {
                continue;
            }
            let length = (image - rx).norm();
            paths.push(make(vec![b], length, f.reflection_coeff));
        }
    }

    if max_order >= 2 {
        for (i, f1) in scene.facets.iter().enumerate() {
            let image1 = mirror_point(&tx, f1);
            for (j, f2) in scene.facets.iter().enumerate() {
                if i == j {
                    continue;
                }
                let image2 = mirror_point(&image1, f2);
                let Some(b2) = bounce_point(&image2, rx, f2) else {
                    continue;
                };
                let Some(b1) = bounce_point(&image1, &b2, f1) else {
                    continue;
                };
                if occlusion_test(&tx, &b1, scene, &[i])
                    || occlusion_test(&b1, &b2, scene, &[i, j])
                    || occlusion_test(&b2, rx, scene, &[j])
                {
                    continue;
                }
                let length = (image2 - rx).norm();
                paths.push(make(
                    vec![b1, b2],
                    length,
                    f1.reflection_coeff * f2.reflection_coeff,
                ));
            }
        }
    }

    paths.sort_by(|a, b| b.gain.total_cmp(&a.gain));
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Aabb, Facet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn floor_scene(tx: [f64; 3], gamma: f64) -> Scene {
        let f = Facet::from_vertices(
            [[-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [10.0, 10.0, 0.0], [-10.0, 10.0, 0.0]],
            gamma,
        );
        Scene {
            facets: vec![f],
            tx_position: tx,
            carrier_freq: 2.4e9,
            aabb: Aabb {
                min: [-10.0, -10.0, -1.0],
                max: [10.0, 10.0, 10.0],
            },
            tau_max: 1e-6,
            g_ref: 1.0,
        }
    }

    #[test]
    fn mirror_examples() {
        let s = floor_scene([0.0, 0.0, 1.0], 1.0);
        let f = &s.facets[0];
        assert_eq!(mirror_point(&Vec3::new(1.0, 2.0, 3.0), f), Vec3::new(1.0, 2.0, -3.0));
        assert_eq!(mirror_point(&Vec3::new(1.0, 2.0, 0.0), f), Vec3::new(1.0, 2.0, 0.0));
        let high = Facet::from_vertices(
            [[0.0, 0.0, 2.0], [1.0, 0.0, 2.0], [1.0, 1.0, 2.0], [0.0, 1.0, 2.0]],
            1.0,
        );
        assert_eq!(mirror_point(&Vec3::new(0.0, 0.0, 1.0), &high), Vec3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn occlusion_examples() {
        let s = Scene::reference_box();
        let a = Vec3::new(2.5, 2.0, 1.5);
        // crosses the floor at its centre
        assert!(occlusion_test(&a, &Vec3::new(2.5, 2.0, -1.0), &s, &[]));
        assert!(!occlusion_test(&a, &Vec3::new(1.0, 1.0, 1.0), &s, &[]));
        // endpoint on the floor, floor excluded
        assert!(!occlusion_test(&a, &Vec3::new(2.0, 2.0, 0.0), &s, &[0]));
        // endpoint on the floor is not an interior crossing even without exclusion
        assert!(!occlusion_test(&a, &Vec3::new(2.0, 2.0, 0.0), &s, &[]));
    }

    #[test]
    fn friis_reference_distance() {
        let mut s = floor_scene([0.0, 0.0, 1.0], 1.0);
        s.facets.clear();
        let d = s.wavelength() / (4.0 * std::f64::consts::PI);
        let paths = trace_paths(&s, &Vec3::new(d, 0.0, 1.0), 2).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].order, 0);
        assert_relative_eq!(paths[0].gain, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn single_floor_bounce() {
        let s = floor_scene([0.0, 0.0, 1.0], 1.0);
        let paths = trace_paths(&s, &Vec3::new(2.0, 0.0, 1.0), 1).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].order, 0);
        assert_relative_eq!(paths[0].path_length(), 2.0, max_relative = 1e-12);
        let r = &paths[1];
        assert_eq!(r.order, 1);
        assert_relative_eq!(r.path_length(), 2.0 * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.tof, 9.434e-9, max_relative = 1e-4);
        let b = Vec3::from(r.bounces[0]);
        assert!((b - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert_relative_eq!(r.aoa(), Vec3::new(-1.0, 0.0, -1.0).normalize(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_coincident_receiver() {
        let s = Scene::reference_box();
        assert!(trace_paths(&s, &s.tx(), 1).is_err());
        assert!(trace_paths(&s, &Vec3::new(1.0, 1.0, 1.0), 3).is_err());
    }

    #[test]
    fn box_counts() {
        // Every wall of a closed box is visible from any interior point, so
        // order 1 yields exactly six reflections; order 2 yields the 30
        // ordered pairs of distinct walls minus the invalid ones.
        let s = Scene::reference_box();
        let rx = Vec3::new(3.3, 2.7, 1.2);
        let p1 = trace_paths(&s, &rx, 1).unwrap();
        assert_eq!(p1.len(), 7);
        let p2 = trace_paths(&s, &rx, 2).unwrap();
        assert!(p2.len() > 7);
        assert!(p2.windows(2).all(|w| w[0].gain >= w[1].gain));
    }

    proptest! {
        #[test]
        fn mirror_is_involution(
            p in prop::array::uniform3(-5.0f64..5.0),
            n in prop::array::uniform3(-1.0f64..1.0),
            off in -3.0f64..3.0,
        ) {
            let n = Vec3::from(n);
            prop_assume!(n.norm() > 0.1);
            let n = n.normalize();
            let u = n.cross(&Vec3::new(0.3, 0.7, 0.1)).normalize();
            let w = n.cross(&u);
            let o = n * off;
            let f = Facet::from_vertices([
                (o - u - w).into(), (o + u - w).into(), (o + u + w).into(), (o - u + w).into()
            ], 0.5);
            let p = Vec3::from(p);
            let back = mirror_point(&mirror_point(&p, &f), &f);
            prop_assert!((back - p).norm() <= 1e-12 * p.norm().max(1.0));
        }

        #[test]
        fn box_paths_are_consistent(
            rx in (0.3f64..4.7, 0.3f64..3.7, 0.3f64..2.7),
            tx in (0.3f64..4.7, 0.3f64..3.7, 0.3f64..2.7),
        ) {
            let mut s = Scene::reference_box();
            s.tx_position = [tx.0, tx.1, tx.2];
            for f in &mut s.facets { f.reflection_coeff = 1.0; }
            let rx = Vec3::new(rx.0, rx.1, rx.2);
            prop_assume!((rx - s.tx()).norm() > 0.05);
            let paths = trace_paths(&s, &rx, 2).unwrap();
            let direct = (rx - s.tx()).norm();
            for p in &paths {
                prop_assert!(p.path_length() >= direct - 1e-9);
                prop_assert!((p.aoa().norm() - 1.0).abs() < 1e-12);
                if p.order == 1 {
                    // image-method length equals the bounce-point route length
                    let b = Vec3::from(p.bounces[0]);
                    let route = (b - s.tx()).norm() + (rx - b).norm();
                    prop_assert!((route - p.path_length()).abs() <= 1e-12 * route);
                }
            }
            // unit reflection coefficients: gain strictly decreasing in length
            for w in paths.windows(2) {
                if w[0].gain > w[1].gain {
                    prop_assert!(w[0].path_length() < w[1].path_length());
                }
            }
            // reciprocity
            let swapped = s.with_tx(rx);
            let back = trace_paths(&swapped, &s.tx(), 2).unwrap();
            prop_assert_eq!(paths.len(), back.len());
            let sorted = |v: &[MultipathComponent]| {
                let mut k: Vec<(u32, f64, f64)> = v.iter().map(|p| (p.order, p.tof, p.gain)).collect();
                k.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
                k
            };
            for (x, y) in sorted(&paths).iter().zip(sorted(&back).iter()) {
                prop_assert_eq!(x.0, y.0);
                prop_assert!((x.1 - y.1).abs() <= 1e-12 * x.1);
                prop_assert!((x.2 - y.2).abs() <= 1e-12 * x.2);
            }
            for p in &paths {
                let q = back.iter().find(|q| (q.tof - p.tof).abs() <= 1e-12 * p.tof && q.order == p.order).unwrap();
                if p.order < 2 {
                    prop_assert!((q.aoa() - p.aod().unwrap()).norm() < 1e-9);
                }
            }
        }
    }
}
