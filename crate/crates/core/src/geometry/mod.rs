//! Meshes, rigid poses, distance and collision queries, depth rendering and
//! TSDF integration.

mod aabb;
mod camera;
mod collision;
mod mesh;
mod pose;
pub mod primitives;
mod triangle;
mod tsdf;
mod volume;

pub use aabb::Aabb;
pub use camera::{render_depth, CameraModel, DepthImage, DepthNoise};
pub use collision::{box_sdf, mesh_distance, mesh_intersects, obb_below_plane, obb_intersects_mesh, Obb};
pub use mesh::{ClosestPoint, DistanceQuery, RayHit, TriangleMesh};
pub use pose::{is_rotation, Pose, ROTATION_TOLERANCE};
pub use triangle::{closest_point as closest_point_on_triangle, Feature};
pub use tsdf::{default_truncation, integrate_tsdf, TsdfIntegration, TsdfWarning, OBSERVED_CHANNEL, TSDF_CHANNEL};
pub use volume::{Channel, GridSpec, VoxelVolume};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("mesh has no vertices or no non-degenerate triangles")]
    EmptyMesh,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("triangle index out of range")]
    IndexOutOfRange,
    #[error("scale must be finite and positive")]
    DegenerateScale,
    #[error("mesh is not watertight; sign is undefined")]
    NotWatertight,
    #[error("matrix is not a proper rotation")]
    InvalidRotation,
    #[error("invalid voxel grid")]
    InvalidGrid,
    #[error("channel length does not match the grid")]
    ChannelLength,
    #[error("invalid camera model")]
    InvalidCamera,
    #[error("truncation must exceed the voxel size")]
    InvalidTruncation,
}
