//! Per-voxel grasp labels and the two-column rotation codec.

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_rotation, GeometryError, GridSpec, VoxelVolume};
use crate::hand::GraspMode;
use crate::math::{Mat3, Vec3};
use crate::scene::SceneGrasp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("matrix is not a rotation")]
    InvalidRotation,
    #[error("raw rotation vector is near zero")]
    ZeroVector,
    #[error("raw basis vectors are parallel")]
    ParallelVectors,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which two basis columns are regressed, and in what order they are
/// orthogonalized; or a raw quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BasisOrder {
    #[default]
    ExEz,
    EyEz,
    Quaternion,
}

const MIN_NORM: f64 = 1e-6;

/// Six raw numbers as a network would regress them.
///
/// `ExEz`: `[ẽ_x, ẽ_z]`. `EyEz`: `[ẽ_y, ẽ_z]`. `Quaternion`: `[w, i, j, k, 0, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEncoding {
    pub order: BasisOrder,
    pub raw: [f64; 6],
}

impl RotationEncoding {
    /// Builds an `ExEz` encoding from the two raw columns.
    pub fn from_columns(e_x_raw: Vec3, e_z_raw: Vec3) -> Self {
        Self { order: BasisOrder::ExEz, raw: [e_x_raw.x, e_x_raw.y, e_x_raw.z, e_z_raw.x, e_z_raw.y, e_z_raw.z] }
    }

    pub fn first(&self) -> Vec3 {
        Vec3::new(self.raw[0], self.raw[1], self.raw[2])
    }

    pub fn second(&self) -> Vec3 {
        Vec3::new(self.raw[3], self.raw[4], self.raw[5])
    }
}

pub fn encode_rotation(r: &Mat3, order: BasisOrder) -> Result<RotationEncoding, AnnotationError> {
    if !is_rotation(r, 1e-6) {
        return Err(AnnotationError::InvalidRotation);
    }
    let pack = |a: Vec3, b: Vec3| [a.x, a.y, a.z, b.x, b.y, b.z];
    let raw = match order {
        BasisOrder::ExEz => pack(r.column(0).into(), r.column(2).into()),
        BasisOrder::EyEz => pack(r.column(1).into(), r.column(2).into()),
        BasisOrder::Quaternion => {
            let q = UnitQuaternion::from_matrix(r);
            [q.w, q.i, q.j, q.k, 0.0, 0.0]
        }
    };
    Ok(RotationEncoding { order, raw })
}

/// Gram-Schmidt on `(a, b)`: returns unit `a` and the unit part of `b`
/// orthogonal to it.
fn orthonormal_pair(a: &Vec3, b: &Vec3) -> Result<(Vec3, Vec3), AnnotationError> {
    let (na, nb) = (a.norm(), b.norm());
    if na < MIN_NORM || nb < MIN_NORM {
        return Err(AnnotationError::ZeroVector);
    }
    let ea = a / na;
    if (ea.cross(&(b / nb))).norm() < MIN_NORM {
        return Err(AnnotationError::ParallelVectors);
    }
    let eb = (b - ea * ea.dot(b)).normalize();
    Ok((ea, eb))
}

pub fn reconstruct_rotation(enc: &RotationEncoding) -> Result<Mat3, AnnotationError> {
    match enc.order {
        BasisOrder::ExEz => {
            let (ex, ez) = orthonormal_pair(&enc.first(), &enc.second())?;
            Ok(Mat3::from_columns(&[ex, ez.cross(&ex), ez]))
        }
        BasisOrder::EyEz => {
            let (ey, ez) = orthonormal_pair(&enc.first(), &enc.second())?;
            Ok(Mat3::from_columns(&[ey.cross(&ez), ey, ez]))
        }
        BasisOrder::Quaternion => {
            let q = Quaternion::new(enc.raw[0], enc.raw[1], enc.raw[2], enc.raw[3]);
            if q.norm() < MIN_NORM {
                return Err(AnnotationError::ZeroVector);
            }
            Ok(UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner())
        }
    }
}

pub const VALIDNESS: &str = "validness";
pub const SCORE: &str = "f_g";
pub const ROT: [&str; 6] = ["rot_0", "rot_1", "rot_2", "rot_3", "rot_4", "rot_5"];
pub const WIDTH: &str = "width";
pub const MODE: &str = "mode";

pub const INVALID_SCORE: f32 = -1.0;
pub const INVALID_WIDTH: f32 = -1.0;
pub const INVALID_MODE: f32 = -1.0;

/// Label of one valid voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelLabel {
    pub index: [usize; 3],
    pub f_g: f64,
    pub rotation: RotationEncoding,
    pub width: f64,
    pub mode: GraspMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelAnnotation {
    pub volume: VoxelVolume,
    pub order: BasisOrder,
    /// Grasps whose TCP fell outside the grid.
    pub skipped: usize,
}

impl VoxelAnnotation {
    pub fn grid(&self) -> &GridSpec {
        &self.volume.grid
    }

    pub fn label(&self, linear: usize) -> Option<VoxelLabel> {
        let ch = |n: &str| self.volume.channel(n).map(|c| c[linear]);
        if ch(VALIDNESS)? != 1.0 {
            return None;
        }
        let mut raw = [0.0; 6];
        for (r, name) in raw.iter_mut().zip(ROT) {
            *r = ch(name)? as f64;
        }
        Some(VoxelLabel {
            index: self.grid().unravel(linear),
            f_g: ch(SCORE)? as f64,
            rotation: RotationEncoding { order: self.order, raw },
            width: ch(WIDTH)? as f64,
            mode: if ch(MODE)? == 1.0 { GraspMode::Power } else { GraspMode::Precision },
        })
    }

    pub fn valid_labels(&self) -> impl Iterator<Item = VoxelLabel> + '_ {
        (0..self.grid().len()).filter_map(|i| self.label(i))
    }

    pub fn valid_count(&self) -> usize {
        self.volume.channel(VALIDNESS).map_or(0, |v| v.iter().filter(|&&x| x == 1.0).count())
    }
}

/// Bins every valid grasp to the voxel holding its TCP. A voxel hit by
/// several grasps keeps the one with the largest `f_g`, the earliest on ties.
pub fn annotate_scene(
    grasps: &[SceneGrasp],
    grid: &GridSpec,
    order: BasisOrder,
) -> Result<VoxelAnnotation, AnnotationError> {
    let mut volume = VoxelVolume::new(*grid)?;
    let mut best: alloc::collections::BTreeMap<usize, &SceneGrasp> = alloc::collections::BTreeMap::new();
    let mut skipped = 0;
    for g in grasps.iter().filter(|g| g.valid) {
        let Some(idx) = grid.voxel_of(&g.pose.translation) else {
            skipped += 1;
            continue;
        };
        best.entry(grid.linear(idx))
            .and_modify(|cur| {
                if g.f_g > cur.f_g {
                    *cur = g;
                }
            })
            .or_insert(g);
    }
    volume.add_channel(VALIDNESS, 0.0);
    volume.add_channel(SCORE, INVALID_SCORE);
    for name in ROT {
        volume.add_channel(name, 0.0);
    }
    volume.add_channel(WIDTH, INVALID_WIDTH);
    volume.add_channel(MODE, INVALID_MODE);
    for (&i, g) in &best {
        let enc = encode_rotation(&g.pose.rotation, order)?;
        volume.channel_mut(VALIDNESS).unwrap()[i] = 1.0;
        volume.channel_mut(SCORE).unwrap()[i] = g.f_g as f32;
        for (k, name) in ROT.iter().enumerate() {
            volume.channel_mut(name).unwrap()[i] = enc.raw[k] as f32;
        }
        volume.channel_mut(WIDTH).unwrap()[i] = g.width as f32;
        volume.channel_mut(MODE).unwrap()[i] = match g.mode {
            GraspMode::Precision => 0.0,
            GraspMode::Power => 1.0,
        };
    }
    Ok(VoxelAnnotation { volume, order, skipped })
}
