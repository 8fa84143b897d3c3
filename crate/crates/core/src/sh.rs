//! Real spherical harmonics up to degree 3.
//!
//! Basis functions are ordered by `l*l + l + m` for `m = -l..=l` and use the
//! convention without the Condon-Shortley phase, so every degree-1 function
//! is a positive multiple of a Cartesian coordinate. Each function is written
//! as a homogeneous polynomial in the direction components; on the unit
//! sphere they are orthonormal.
//!
//! | index | function                  | constant                |
//! |-------|---------------------------|-------------------------|
//! | 0     | 1                         | 0.28209479177387814     |
//! | 1,2,3 | y, z, x                   | 0.4886025119029199      |
//! | 4,5,7 | xy, yz, xz                | 1.0925484305920792      |
//! | 6     | 2z^2 - x^2 - y^2          | 0.31539156525252005     |
//! | 8     | x^2 - y^2                 | 0.5462742152960396      |
//! | 9,15  | y(3x^2-y^2), x(x^2-3y^2)  | 0.5900435899266435      |
//! | 10    | xyz                       | 2.890611442640554       |
//! | 11,13 | y(4z^2-x^2-y^2), x(...)   | 0.4570457994644658      |
//! | 12    | z(2z^2-3x^2-3y^2)         | 0.3731763325901154      |
//! | 14    | z(x^2-y^2)                | 1.445305721320277       |

use crate::Vec3;

pub const MAX_DEGREE: usize = 3;
pub const MAX_COEFFS: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 1);

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2A: f64 = 1.092_548_430_592_079_2;
const C2B: f64 = 0.315_391_565_252_520_05;
const C2C: f64 = 0.546_274_215_296_039_6;
const C3A: f64 = 0.590_043_589_926_643_5;
const C3B: f64 = 2.890_611_442_640_554;
const C3C: f64 = 0.457_045_799_464_465_8;
const C3D: f64 = 0.373_176_332_590_115_4;
const C3E: f64 = 1.445_305_721_320_277;

/// Value of the constant basis function, `1 / (2 sqrt(pi))`.
pub const Y00: f64 = C0;

/// Number of coefficients for a given degree.
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Evaluates every basis function of degree `<= degree` at `dir`.
///
/// Entries past `num_coeffs(degree)` are left at zero.
pub fn basis(degree: usize, dir: &Vec3) -> [f64; MAX_COEFFS] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut b = [0.0; MAX_COEFFS];
    b[0] = C0;
    if degree >= 1 {
        b[1] = C1 * y;
        b[2] = C1 * z;
        b[3] = C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = C2A * x * y;
        b[5] = C2A * y * z;
        b[6] = C2B * (2.0 * zz - xx - yy);
        b[7] = C2A * x * z;
        b[8] = C2C * (xx - yy);
        if degree >= 3 {
            b[9] = C3A * y * (3.0 * xx - yy);
            b[10] = C3B * x * y * z;
            b[11] = C3C * y * (4.0 * zz - xx - yy);
            b[12] = C3D * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = C3C * x * (4.0 * zz - xx - yy);
            b[14] = C3E * z * (xx - yy);
            b[15] = C3A * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// Partial derivatives of each basis polynomial with respect to (x, y, z).
pub fn basis_grad(degree: usize, dir: &Vec3) -> [[f64; 3]; MAX_COEFFS] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut g = [[0.0; 3]; MAX_COEFFS];
    if degree >= 1 {
        g[1] = [0.0, C1, 0.0];
        g[2] = [0.0, 0.0, C1];
        g[3] = [C1, 0.0, 0.0];
    }
    if degree >= 2 {
        g[4] = [C2A * y, C2A * x, 0.0];
        g[5] = [0.0, C2A * z, C2A * y];
        g[6] = [-2.0 * C2B * x, -2.0 * C2B * y, 4.0 * C2B * z];
        g[7] = [C2A * z, 0.0, C2A * x];
        g[8] = [2.0 * C2C * x, -2.0 * C2C * y, 0.0];
        if degree >= 3 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            g[9] = [6.0 * C3A * x * y, 3.0 * C3A * (xx - yy), 0.0];
            g[10] = [C3B * y * z, C3B * x * z, C3B * x * y];
            g[11] = [
                -2.0 * C3C * x * y,
                C3C * (4.0 * zz - xx - 3.0 * yy),
                8.0 * C3C * y * z,
            ];
            g[12] = [
                -6.0 * C3D * x * z,
                -6.0 * C3D * y * z,
                C3D * (6.0 * zz - 3.0 * xx - 3.0 * yy),
            ];
            g[13] = [
                C3C * (4.0 * zz - 3.0 * xx - yy),
                -2.0 * C3C * x * y,
                8.0 * C3C * x * z,
            ];
            g[14] = [2.0 * C3E * x * z, -2.0 * C3E * y * z, C3E * (xx - yy)];
            g[15] = [3.0 * C3A * (xx - yy), -6.0 * C3A * x * y, 0.0];
        }
    }
    g
}

/// Evaluates `sum_lm c_lm Y_lm(dir)`; the degree is inferred from `coeffs.len()`.
pub fn sh_eval(coeffs: &[f64], dir: &Vec3) -> f64 {
    let degree = degree_for(coeffs.len());
    let b = basis(degree, dir);
    coeffs.iter().zip(b.iter()).map(|(c, y)| c * y).sum()
}

/// Degree whose coefficient count is `n`. Panics on counts that are not a
/// perfect square up to 16.
pub fn degree_for(n: usize) -> usize {
    match n {
        1 => 0,
        4 => 1,
        9 => 2,
        16 => 3,
        _ => panic!("{n} is not a supported spherical-harmonic coefficient count"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_term() {
        for d in [Vec3::x(), Vec3::new(0.6, -0.8, 0.0), -Vec3::z()] {
            assert_abs_diff_eq!(sh_eval(&[1.0], &d), 0.282_094_79, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(Y00, 0.5 / PI.sqrt(), epsilon = 1e-16);
    }

    #[test]
    fn degree_one_z() {
        let c = [0.0, 0.0, 1.0, 0.0];
        assert_abs_diff_eq!(sh_eval(&c, &Vec3::z()), 0.488_602_51, epsilon = 1e-8);
        assert_abs_diff_eq!(sh_eval(&c, &-Vec3::z()), -0.488_602_51, epsilon = 1e-8);
    }

    #[test]
    fn linear_in_coefficients() {
        let c: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = Vec3::new(0.2, -0.5, 0.7).normalize();
        let scaled: Vec<f64> = c.iter().map(|v| v * -2.5).collect();
        assert_abs_diff_eq!(sh_eval(&scaled, &d), -2.5 * sh_eval(&c, &d), epsilon = 1e-12);
    }

    /// Midpoint quadrature over the sphere as an independent check of the
    /// normalization constants.
    #[test]
    fn orthonormal_on_sphere() {
        let (nt, np) = (400, 800);
        let mut gram = [[0.0f64; MAX_COEFFS]; MAX_COEFFS];
        for i in 0..nt {
            let theta = (i as f64 + 0.5) * PI / nt as f64;
            let w = theta.sin() * (PI / nt as f64) * (2.0 * PI / np as f64);
            for j in 0..np {
                let phi = (j as f64 + 0.5) * 2.0 * PI / np as f64;
                let d = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let b = basis(3, &d);
                for a in 0..MAX_COEFFS {
                    for c in 0..MAX_COEFFS {
                        gram[a][c] += w * b[a] * b[c];
                    }
                }
            }
        }
        for a in 0..MAX_COEFFS {
            for c in 0..MAX_COEFFS {
                let expect = if a == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[a][c], expect, epsilon = 2e-4);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = Vec3::new(0.3, -0.4, 0.8);
        let g = basis_grad(3, &d);
        let h = 1e-6;
        for axis in 0..3 {
            let mut dp = d;
            let mut dm = d;
            dp[axis] += h;
            dm[axis] -= h;
            let (bp, bm) = (basis(3, &dp), basis(3, &dm));
            for k in 0..MAX_COEFFS {
                let fd = (bp[k] - bm[k]) / (2.0 * h);
                assert_abs_diff_eq!(g[k][axis], fd, epsilon = 1e-8);
            }
        }
    }
}
