use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// Planar convex quadrilateral reflector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    /// Four ordered corners, meters.
    pub vertices: [[f64; 3]; 4],
    /// Unit normal.
    pub normal: [f64; 3],
    /// Amplitude reflection coefficient in [0, 1].
    pub reflection_coeff: f64,
}

impl Facet {
    /// Builds a facet from ordered corners, deriving the normal from the winding.
    pub fn from_vertices(vertices: [[f64; 3]; 4], reflection_coeff: f64) -> Self {
        let v: Vec<Vec3> = vertices.iter().map(|p| Vec3::from(*p)).collect();
        let n = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
        Self {
            vertices,
            normal: [n.x, n.y, n.z],
            reflection_coeff,
        }
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        Vec3::from(self.vertices[i])
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::from(self.normal)
    }

    /// Signed distance of `p` from the facet's plane.
    pub fn plane_distance(&self, p: &Vec3) -> f64 {
        self.normal().dot(&(p - self.vertex(0)))
    }

    pub fn area(&self) -> f64 {
        let v: Vec<Vec3> = (0..4).map(|i| self.vertex(i)).collect();
        0.5 * ((v[1] - v[0]).cross(&(v[2] - v[0])).norm() + (v[2] - v[0]).cross(&(v[3] - v[0])).norm())
    }

    fn scale(&self) -> f64 {
        (self.vertex(2) - self.vertex(0)).norm().max((self.vertex(3) - self.vertex(1)).norm())
    }

    /// Whether a point lying on the facet's plane falls inside the quad
    /// (boundary included).
    pub fn contains(&self, p: &Vec3) -> bool {
        let n = self.normal();
        let tol = 1e-12 * self.scale() * self.scale();
        let (mut pos, mut neg) = (false, false);
        for i in 0..4 {
            let a = self.vertex(i);
            let b = self.vertex((i + 1) % 4);
            let s = n.dot(&(b - a).cross(&(p - a)));
            if s > tol {
                pos = true;
            } else if s < -tol {
                neg = true;
            }
        }
        !(pos && neg)
    }

    /// Parameter `t` at which the line `a + t (b - a)` meets the facet's plane.
    pub fn line_parameter(&self, a: &Vec3, b: &Vec3) -> Option<f64> {
        let n = self.normal();
        let denom = n.dot(&(b - a));
        if denom.abs() < 1e-15 * (b - a).norm().max(1e-300) {
            return None;
        }
        Some(n.dot(&(self.vertex(0) - a)) / denom)
    }

    /// Euclidean distance from `p` to the closed quad.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let d = self.plane_distance(p);
        let proj = p - self.normal() * d;
        if self.contains(&proj) {
            return d.abs();
        }
        (0..4)
            .map(|i| point_segment_distance(p, &self.vertex(i), &self.vertex((i + 1) % 4)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform sample on the quad (area weighted over its two triangles).
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let v: Vec<Vec3> = (0..4).map(|i| self.vertex(i)).collect();
        let a1 = 0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm();
        let a2 = 0.5 * (v[2] - v[0]).cross(&(v[3] - v[0])).norm();
        let (p, q, r) = if rng.gen::<f64>() * (a1 + a2) < a1 {
            (v[0], v[1], v[2])
        } else {
            (v[0], v[2], v[3])
        };
        let (mut u, mut w) = (rng.gen::<f64>(), rng.gen::<f64>());
        if u + w > 1.0 {
            u = 1.0 - u;
            w = 1.0 - w;
        }
        p + (q - p) * u + (r - p) * w
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScene(format!("facet {index}: {msg}")));
        let n = self.normal();
        if ((n.norm() - 1.0).abs()) > 1e-12 {
            return bad(format!("normal norm {} is not 1", n.norm()));
        }
        if !(0.0..=1.0).contains(&self.reflection_coeff) {
            return bad(format!("reflection coefficient {} outside [0, 1]", self.reflection_coeff));
        }
        let scale = self.scale();
        if scale <= 0.0 {
            return bad("degenerate quad".into());
        }
        for i in 1..4 {
            if self.plane_distance(&self.vertex(i)).abs() > 1e-9 * scale.max(1.0) {
                return bad(format!("vertex {i} is not coplanar"));
            }
        }
        let geo = (self.vertex(1) - self.vertex(0)).cross(&(self.vertex(2) - self.vertex(0)));
        if geo.norm() == 0.0 || geo.normalize().dot(&n).abs() < 1.0 - 1e-9 {
            return bad("normal is not perpendicular to the quad".into());
        }
        Ok(())
    }
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains_strict(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn diagonal(&self) -> f64 {
        (Vec3::from(self.max) - Vec3::from(self.min)).norm()
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::from(self.max) - Vec3::from(self.min)
    }
}

/// Scene-level constants copied into every model trained on the scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub tau_max: f64,
    pub g_ref: f64,
    pub carrier_freq: f64,
    pub tx_position: [f64; 3],
}

impl SceneMeta {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }
}

/// Faceted environment with a fixed transmitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub facets: Vec<Facet>,
    pub tx_position: [f64; 3],
    /// Hz.
    pub carrier_freq: f64,
    pub aabb: Aabb,
    /// Seconds; ToF values are stored divided by this.
    pub tau_max: f64,
    /// Linear amplitude that maps to 1.0 in the gain channel.
    pub g_ref: f64,
}

impl Scene {
    pub fn tx(&self) -> Vec3 {
        Vec3::from(self.tx_position)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn meta(&self) -> SceneMeta {
        SceneMeta {
            tau_max: self.tau_max,
            g_ref: self.g_ref,
            carrier_freq: self.carrier_freq,
            tx_position: self.tx_position,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.facets.iter().enumerate() {
            f.validate(i)?;
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::InvalidScene("carrier_freq must be positive".into()));
        }
        if !(self.g_ref > 0.0) {
            return Err(Error::InvalidScene("g_ref must be positive".into()));
        }
        if !self.aabb.contains_strict(&self.tx()) {
            return Err(Error::InvalidScene("tx_position must lie strictly inside aabb".into()));
        }
        if !(self.tau_max > self.aabb.diagonal() / SPEED_OF_LIGHT) {
            return Err(Error::InvalidScene("tau_max must exceed aabb diagonal / c".into()));
        }
        Ok(())
    }

    /// Same scene with the transmitter moved.
    pub fn with_tx(&self, tx: Vec3) -> Self {
        Self {
            tx_position: [tx.x, tx.y, tx.z],
            ..self.clone()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let scene: Scene = serde_json::from_str(&text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Closed rectangular room spanning `[0, dims]` with inward-facing walls.
    ///
    /// `gammas` are the reflection coefficients of floor, ceiling, x=0, x=max,
    /// y=0 and y=max in that order. `tau_max` covers every path of up to two
    /// bounces (three aabb diagonals) and `g_ref` is the free-space amplitude
    /// at 1 m.
    pub fn box_room(dims: [f64; 3], tx: [f64; 3], carrier_freq: f64, gammas: [f64; 6]) -> Self {
        let [a, b, c] = dims;
        let quads = [
            [[0.0, 0.0, 0.0], [a, 0.0, 0.0], [a, b, 0.0], [0.0, b, 0.0]],
            [[0.0, 0.0, c], [0.0, b, c], [a, b, c], [a, 0.0, c]],
            [[0.0, 0.0, 0.0], [0.0, b, 0.0], [0.0, b, c], [0.0, 0.0, c]],
            [[a, 0.0, 0.0], [a, 0.0, c], [a, b, c], [a, b, 0.0]],
            [[0.0, 0.0, 0.0], [0.0, 0.0, c], [a, 0.0, c], [a, 0.0, 0.0]],
            [[0.0, b, 0.0], [a, b, 0.0], [a, b, c], [0.0, b, c]],
        ];
        let facets = quads
            .iter()
            .zip(gammas)
            .map(|(q, g)| Facet::from_vertices(*q, g))
            .collect();
        let aabb = Aabb {
            min: [0.0; 3],
            max: dims,
        };
        let lambda = SPEED_OF_LIGHT / carrier_freq;
        Self {
            facets,
            tx_position: tx,
            carrier_freq,
            aabb,
            tau_max: 3.0 * aabb.diagonal() / SPEED_OF_LIGHT,
            g_ref: lambda / (4.0 * std::f64::consts::PI),
        }
    }

    /// Long corridor (x is the long axis) with a pillar-free rectangular section.
    pub fn corridor(length: f64, width: f64, height: f64, tx: [f64; 3], carrier_freq: f64) -> Self {
        Self::box_room(
            [length, width, height],
            tx,
            carrier_freq,
            [0.5, 0.4, 0.7, 0.7, 0.6, 0.6],
        )
    }

    /// The 5 x 4 x 3 m reference room used by the examples and tests.
    pub fn reference_box() -> Self {
        Self::box_room(
            [5.0, 4.0, 3.0],
            [1.4, 1.1, 1.9],
            2.4e9,
            [0.5, 0.4, 0.6, 0.7, 0.65, 0.55],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_room_is_valid() {
        let s = Scene::reference_box();
        s.validate().unwrap();
        let centre = Vec3::new(2.5, 2.0, 1.5);
        for f in &s.facets {
            assert!(f.plane_distance(&centre) > 0.0, "normals face inward");
            assert!(f.contains(&(f.vertex(0) * 0.5 + f.vertex(2) * 0.5)));
        }
        let total: f64 = s.facets.iter().map(Facet::area).sum();
        assert!((total - 2.0 * (20.0 + 15.0 + 12.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_facets() {
        let mut s = Scene::reference_box();
        s.facets[0].reflection_coeff = 1.5;
        assert!(s.validate().is_err());
        let mut s = Scene::reference_box();
        s.facets[1].vertices[2][2] += 0.1;
        assert!(s.validate().is_err());
        let mut s = Scene::reference_box();
        s.tx_position = [9.0, 0.0, 0.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn distance_to_quad() {
        let s = Scene::reference_box();
        let floor = &s.facets[0];
        assert!((floor.distance_to(&Vec3::new(1.0, 1.0, 0.3)) - 0.3).abs() < 1e-12);
        assert!((floor.distance_to(&Vec3::new(-1.0, 1.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = Scene::reference_box();
        let text = serde_json::to_string(&s).unwrap();
        let back: Scene = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
