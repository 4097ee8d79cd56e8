use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::math::{floor, Vec3};

/// Regular grid placement: `origin` is the minimum corner of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl Default for GridSpec {
    /// 40³ voxels over a 0.30 m cube resting on the table plane.
    fn default() -> Self {
        Self { origin: [-0.15, -0.15, 0.0], voxel_size: 0.0075, dims: [40, 40, 40] }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) || self.dims.contains(&0) {
            return Err(GeometryError::InvalidGrid);
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidGrid);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    /// Linear index, z fastest (`[x][y][z]` row-major).
    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn unravel(&self, linear: usize) -> [usize; 3] {
        let k = linear % self.dims[2];
        let rest = linear / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    pub fn voxel_center(&self, idx: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin[0] + (idx[0] as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (idx[1] as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (idx[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = floor((p[a] - self.origin[a]) / self.voxel_size);
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    pub fn upper_corner(&self) -> Vec3 {
        Vec3::new(
            self.origin[0] + self.dims[0] as f64 * self.voxel_size,
            self.origin[1] + self.dims[1] as f64 * self.voxel_size,
            self.origin[2] + self.dims[2] as f64 * self.voxel_size,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub data: Vec<f32>,
}

/// Grid with any number of named `f32` channels of identical length.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    pub grid: GridSpec,
    channels: Vec<Channel>,
}

impl VoxelVolume {
    pub fn new(grid: GridSpec) -> Result<Self, GeometryError> {
        grid.validate()?;
        Ok(Self { grid, channels: Vec::new() })
    }

    /// Appends a channel filled with `fill`; replaces it if the name exists.
    pub fn add_channel(&mut self, name: &str, fill: f32) -> &mut [f32] {
        let len = self.grid.len();
        if let Some(pos) = self.channels.iter().position(|c| c.name == name) {
            self.channels[pos].data = alloc::vec![fill; len];
            return &mut self.channels[pos].data;
        }
        self.channels.push(Channel { name: String::from(name), data: alloc::vec![fill; len] });
        &mut self.channels.last_mut().unwrap().data
    }

    pub fn insert_channel(&mut self, name: &str, data: Vec<f32>) -> Result<(), GeometryError> {
        if data.len() != self.grid.len() {
            return Err(GeometryError::ChannelLength);
        }
        self.add_channel(name, 0.0).copy_from_slice(&data);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.data.as_slice())
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        self.channels.iter_mut().find(|c| c.name == name).map(|c| c.data.as_mut_slice())
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }
}
