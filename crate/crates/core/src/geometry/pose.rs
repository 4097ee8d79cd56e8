use core::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::math::{Mat3, Vec3};

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`Pose::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rigid transform: `x_parent = rotation * x_child + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    if r.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let err = (r.transpose() * r - Mat3::identity()).abs().max();
    err <= tol && (r.determinant() - 1.0).abs() <= tol
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !is_rotation(&rotation, ROTATION_TOLERANCE) {
            return Err(GeometryError::InvalidRotation);
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Mat3::identity(), translation }
    }

    pub fn from_rotation(rotation: Mat3) -> Self {
        Self { rotation, translation: Vec3::zeros() }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(p - self.translation))
    }

    #[inline]
    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.tr_mul(v)
    }

    pub fn is_valid(&self) -> bool {
        is_rotation(&self.rotation, ROTATION_TOLERANCE) && self.translation.iter().all(|v| v.is_finite())
    }

    /// Rotation rows as nested arrays (row-major), the serialized layout.
    pub fn rotation_rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rotation;
        [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]]
    }

    pub fn from_rows(rows: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, GeometryError> {
        let r = Mat3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0], rows[2][1], rows[2][2],
        );
        Pose::new(r, Vec3::new(translation[0], translation[1], translation[2]))
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Pose", 2)?;
        s.serialize_field("rotation", &self.rotation_rows())?;
        s.serialize_field("translation", &[self.translation.x, self.translation.y, self.translation.z])?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PoseVisitor;

        impl<'de> Visitor<'de> for PoseVisitor {
            type Value = Pose;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a pose with `rotation` rows and `translation`")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Pose, A::Error> {
                let mut rotation: Option<[[f64; 3]; 3]> = None;
                let mut translation: Option<[f64; 3]> = None;
                while let Some(key) = map.next_key::<&str>()? {
                    match key {
                        "rotation" => rotation = Some(map.next_value()?),
                        "translation" => translation = Some(map.next_value()?),
                        other => return Err(de::Error::unknown_field(other, &["rotation", "translation"])),
                    }
                }
                let rotation = rotation.ok_or_else(|| de::Error::missing_field("rotation"))?;
                let translation = translation.ok_or_else(|| de::Error::missing_field("translation"))?;
                Pose::from_rows(rotation, translation).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_struct("Pose", &["rotation", "translation"], PoseVisitor)
    }
}
