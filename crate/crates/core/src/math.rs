//! Scalar helpers and vector aliases shared by every module.
//!
//! The crate is `no_std`, so transcendental functions go through `libm`.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Standard gravity used to convert masses to weights [m/s^2].
pub const STANDARD_GRAVITY: f64 = 9.81;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn tan(x: f64) -> f64 {
    libm::tan(x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x.clamp(-1.0, 1.0))
}

#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x.clamp(-1.0, 1.0))
}

#[inline]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Angle between two non-zero vectors in radians.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    acos(a.dot(b) / (na * nb))
}

/// Any unit vector orthogonal to `n`, chosen deterministically from the
/// least-aligned coordinate axis.
pub fn orthogonal_unit(n: &Vec3) -> Vec3 {
    let a = n.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    n.cross(&axis).normalize()
}

/// Rotation matrix for a rotation of `angle` radians about unit `axis`.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let (s, c) = (sin(angle), cos(angle));
    let t = 1.0 - c;
    let (x, y, z) = (axis.x, axis.y, axis.z);
    Mat3::new(
        t * x * x + c,
        t * x * y - s * z,
        t * x * z + s * y,
        t * x * y + s * z,
        t * y * y + c,
        t * y * z - s * x,
        t * x * z - s * y,
        t * y * z + s * x,
        t * z * z + c,
    )
}

/// Rotation vector (axis times angle) of a rotation matrix. Loses the axis
/// sign near a half turn.
pub fn rotation_vector(r: &Mat3) -> Vec3 {
    let skew = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let angle = acos((r.trace() - 1.0) / 2.0);
    let s = sin(angle);
    if s.abs() < 1e-12 {
        return skew / 2.0;
    }
    skew * (angle / (2.0 * s))
}

/// Re-orthonormalizes a nearly orthonormal matrix (columns x, y; z = x × y).
pub fn reorthonormalize(m: &Mat3) -> Mat3 {
    let x = m.column(0).normalize();
    let y0 = m.column(1).into_owned();
    let y = (y0 - x * x.dot(&y0)).normalize();
    let z = x.cross(&y);
    Mat3::from_columns(&[x, y, z])
}
