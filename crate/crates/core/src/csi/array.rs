use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Antenna array in a receiver's local frame.
///
/// Element `(n, m)` sits at `(n u + m v) * spacing * wavelength`, where `u`
/// is the horizontal axis perpendicular to the boresight (`z x boresight`)
/// and `v = boresight x u`. A ULA uses `u` only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Elements along `u` and `v`; a ULA ignores the second count.
    pub counts: [usize; 2],
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub boresight: [f64; 3],
}

impl ArrayGeometry {
    pub fn ula(n: usize, spacing: f64) -> Self {
        Self {
            kind: ArrayKind::Ula,
            counts: [n, 1],
            spacing,
            boresight: [1.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let b = Vec3::from(self.boresight);
        if self.counts[0] == 0 || (self.kind == ArrayKind::Upa && self.counts[1] == 0) {
            return Err(crate::Error::InvalidArgument("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0) || !(b.norm() > 0.0) {
            return Err(crate::Error::InvalidArgument("array spacing and boresight must be nonzero".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self.kind {
            ArrayKind::Ula => self.counts[0],
            ArrayKind::Upa => self.counts[0] * self.counts[1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axes(&self) -> (Vec3, Vec3) {
        let b = Vec3::from(self.boresight).normalize();
        let mut u = Vec3::z().cross(&b);
        if u.norm() < 1e-9 {
            u = Vec3::y();
        }
        let u = u.normalize();
        (u, b.cross(&u))
    }

    /// Element positions in metres.
    pub fn positions(&self, wavelength: f64) -> Vec<Vec3> {
        let (u, v) = self.axes();
        let d = self.spacing * wavelength;
        let rows = if self.kind == ArrayKind::Upa { self.counts[1] } else { 1 };
        let mut out = Vec::with_capacity(self.len());
        for m in 0..rows {
            for n in 0..self.counts[0] {
                out.push((u * n as f64 + v * m as f64) * d);
            }
        }
        out
    }
}

/// Per-element phase `exp(-j 2 pi / lambda <p_n, dir>)` for a local unit
/// direction.
pub fn steering_vector(arr: &ArrayGeometry, dir: &Vec3, wavelength: f64) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    arr.positions(wavelength)
        .iter()
        .map(|p| Complex64::from_polar(1.0, -k * p.dot(dir)))
        .collect()
}

/// Unit-norm matched beam toward a local direction.
pub fn matched_beam(arr: &ArrayGeometry, dir: &Vec3, wavelength: f64) -> Vec<Complex64> {
    let a = steering_vector(arr, dir, wavelength);
    let s = 1.0 / (a.len() as f64).sqrt();
    a.into_iter().map(|v| v * s).collect()
}

/// Power gain `|w^H a|^2` of beam `w` for a path arriving along `dir`.
pub fn array_gain(arr: &ArrayGeometry, w: &[Complex64], dir: &Vec3, wavelength: f64) -> f64 {
    let a = steering_vector(arr, dir, wavelength);
    w.iter().zip(&a).map(|(wi, ai)| wi.conj() * ai).sum::<Complex64>().norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const LAMBDA: f64 = 0.125;

    #[test]
    fn broadside_is_all_ones() {
        let arr = ArrayGeometry::ula(8, 0.5);
        for v in steering_vector(&arr, &Vec3::x(), LAMBDA) {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn endfire_two_elements() {
        let arr = ArrayGeometry::ula(2, 0.5);
        // z x x = y is the array axis
        let a = steering_vector(&arr, &Vec3::y(), LAMBDA);
        assert_abs_diff_eq!(a[0].re, 1.0, epsilon = 1e-12);
        let e = Complex64::from_polar(1.0, -std::f64::consts::PI);
        assert_abs_diff_eq!((a[1] - e).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upa_layout() {
        let arr = ArrayGeometry {
            kind: ArrayKind::Upa,
            counts: [4, 3],
            spacing: 0.5,
            boresight: [0.0, 1.0, 0.0],
        };
        let p = arr.positions(1.0);
        assert_eq!(p.len(), 12);
        for q in &p {
            assert_abs_diff_eq!(q.y, 0.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn unit_modulus_and_conjugate_symmetry(az in -3.1f64..3.1, el in -1.5f64..1.5, n in 1usize..20) {
            let arr = ArrayGeometry::ula(n, 0.5);
            let d = crate::pose::angles_to_direction(az, el);
            let a = steering_vector(&arr, &d, LAMBDA);
            let b = steering_vector(&arr, &-d, LAMBDA);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.norm() - 1.0).abs() <= 1e-12);
                prop_assert!((x.conj() - y).norm() <= 1e-12);
            }
            let w = matched_beam(&arr, &d, LAMBDA);
            prop_assert!((array_gain(&arr, &w, &d, LAMBDA) - n as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn off_beam_gain_is_lower() {
        let arr = ArrayGeometry::ula(16, 0.5);
        let d0 = crate::pose::angles_to_direction(0.2, 0.0);
        let w = matched_beam(&arr, &d0, LAMBDA);
        // null-to-null half beamwidth of a 16-element half-wave ULA is ~7 deg
        let d1 = crate::pose::angles_to_direction(0.2 + 0.15, 0.0);
        assert!(array_gain(&arr, &w, &d1, LAMBDA) < 16.0);
    }
}
