use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, TriangleMesh};
use crate::math::{Mat3, Vec3};

/// Pinhole camera. `pose` maps camera coordinates (x right, y down, z forward)
/// to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub pose: Pose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(
        pose: Pose,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let cam = Self { pose, fx, fy, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GeometryError::InvalidCamera);
        }
        if self.width == 0 || self.height == 0 || !self.pose.is_valid() {
            return Err(GeometryError::InvalidCamera);
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`; `up` is a world-frame hint.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fx: f64,
        fy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = crate::math::orthogonal_unit(&forward);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_columns(&[right, down, forward]);
        let pose = Pose::new(rotation, eye).map_err(|_| GeometryError::InvalidCamera)?;
        Self::new(pose, fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    /// Default acquisition camera: 0.5 m in front of and above the workspace
    /// center, looking at it.
    pub fn default_scene_camera() -> Self {
        Self::look_at(Vec3::new(0.5, 0.0, 0.5), Vec3::new(0.0, 0.0, 0.08), Vec3::z(), 320.0, 320.0, 320, 240)
            .expect("default camera is valid")
    }

    /// Unnormalized ray direction through the center of pixel `(u, v)`, camera frame, z = 1.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0)
    }

    /// Continuous pixel coordinates of a camera-frame point with positive depth.
    pub fn project(&self, p_cam: &Vec3) -> Option<(f64, f64)> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some((self.fx * p_cam.x / p_cam.z + self.cx, self.fy * p_cam.y / p_cam.z + self.cy))
    }
}

/// Z-depth image in meters; `0.0` marks pixels without a hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn get(&self, u: usize, v: usize) -> Option<f32> {
        let d = self.data[v * self.width + u];
        (d > 0.0).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }
}

/// Optional additive Gaussian depth noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Ray-casts every pixel against the posed meshes and keeps the nearest hit.
pub fn render_depth(objects: &[(&TriangleMesh, Pose)], camera: &CameraModel, noise: Option<DepthNoise>) -> DepthImage {
    let mut data = alloc::vec![0.0f32; camera.width * camera.height];
    // Precompute camera-to-object transforms.
    let in_object: Vec<Pose> = objects.iter().map(|(_, pose)| pose.inverse().compose(&camera.pose)).collect();
    for v in 0..camera.height {
        for u in 0..camera.width {
            let ray = camera.pixel_ray(u, v);
            let mut best = f64::INFINITY;
            for ((mesh, _), cam_in_obj) in objects.iter().zip(&in_object) {
                let origin = cam_in_obj.translation;
                let dir = cam_in_obj.transform_vector(&ray);
                if let Some(hit) = mesh.raycast(&origin, &dir, 0.0, best) {
                    // `ray.z == 1`, so the parameter is the z-depth.
                    best = best.min(hit.t);
                }
            }
            if best.is_finite() {
                data[v * camera.width + u] = best as f32;
            }
        }
    }
    if let Some(noise) = noise {
        if noise.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let normal = Normal::new(0.0, noise.sigma).expect("finite sigma");
            for d in data.iter_mut() {
                let e = normal.sample(&mut rng);
                if *d > 0.0 {
                    *d = (*d as f64 + e).max(1e-6) as f32;
                }
            }
        }
    }
    DepthImage { width: camera.width, height: camera.height, data }
}
