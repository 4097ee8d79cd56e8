//! Projective truncated signed distance integration of a single depth image.

use super::camera::{CameraModel, DepthImage};
use super::volume::{GridSpec, VoxelVolume};
use super::GeometryError;
use crate::math::floor;

pub const TSDF_CHANNEL: &str = "tsdf";
/// 1 where the voxel received a measurement, 0 otherwise.
pub const OBSERVED_CHANNEL: &str = "observed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsdfWarning {
    /// No voxel of the grid projects into the image.
    OutsideFrustum,
}

#[derive(Debug, Clone)]
pub struct TsdfIntegration {
    pub volume: VoxelVolume,
    pub observed: usize,
    pub warning: Option<TsdfWarning>,
}

/// Default truncation: four voxels.
pub fn default_truncation(grid: &GridSpec) -> f64 {
    4.0 * grid.voxel_size
}

/// Integrates `depth` into a fresh volume. Each voxel center is projected
/// into the image; the signed distance along the pixel ray between the
/// measured surface and the voxel is divided by `truncation` and clamped to
/// [-1, 1]. Voxels outside the image, on invalid pixels, or further than
/// `truncation` behind the surface stay unobserved (`tsdf = 0`, `observed = 0`).
pub fn integrate_tsdf(
    depth: &DepthImage,
    camera: &CameraModel,
    grid: &GridSpec,
    truncation: f64,
) -> Result<TsdfIntegration, GeometryError> {
    grid.validate()?;
    camera.validate()?;
    if !(truncation > grid.voxel_size) {
        return Err(GeometryError::InvalidTruncation);
    }
    let mut volume = VoxelVolume::new(*grid)?;
    volume.add_channel(TSDF_CHANNEL, 0.0);
    volume.add_channel(OBSERVED_CHANNEL, 0.0);
    let mut tsdf = alloc::vec![0.0f32; grid.len()];
    let mut observed = alloc::vec![0.0f32; grid.len()];
    let mut in_frustum = false;
    let mut count = 0usize;
    for lin in 0..grid.len() {
        let center = grid.voxel_center(grid.unravel(lin));
        let p_cam = camera.pose.inverse_transform_point(&center);
        let Some((u, v)) = camera.project(&p_cam) else {
            continue;
        };
        if !(u >= 0.0 && v >= 0.0 && u < camera.width as f64 && v < camera.height as f64) {
            continue;
        }
        in_frustum = true;
        let (ui, vi) = (floor(u) as usize, floor(v) as usize);
        let Some(measured) = depth.get(ui, vi) else {
            continue;
        };
        // Along-ray distance: scale the z difference by the ray length per unit depth.
        let ray_scale = p_cam.norm() / p_cam.z;
        let sdf = (measured as f64 - p_cam.z) * ray_scale;
        if sdf < -truncation {
            continue;
        }
        tsdf[lin] = (sdf / truncation).clamp(-1.0, 1.0) as f32;
        observed[lin] = 1.0;
        count += 1;
    }
    volume.insert_channel(TSDF_CHANNEL, tsdf)?;
    volume.insert_channel(OBSERVED_CHANNEL, observed)?;
    Ok(TsdfIntegration { volume, observed: count, warning: (!in_frustum).then_some(TsdfWarning::OutsideFrustum) })
}
