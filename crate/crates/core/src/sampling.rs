//! Antipodal grasp candidates and their random perturbations.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, TriangleMesh};
use crate::hand::GripperParams;
use crate::math::{angle_between, atan, axis_angle, cos, orthogonal_unit, sin, sqrt, Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("contact points coincide")]
    ZeroLength,
    #[error("invalid sampler config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    AntipodalSeed,
    Perturbed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: u64,
    /// TCP in the object frame.
    pub pose: Pose,
    pub pre_width: f64,
    pub provenance: Provenance,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_surface_samples: usize,
    pub mu: f64,
    pub approach_rotations: usize,
    pub perturbations_per_seed: usize,
    pub trans_sigma: f64,
    pub rot_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_surface_samples: 64,
            mu: 0.75,
            approach_rotations: 6,
            perturbations_per_seed: 8,
            trans_sigma: 0.010,
            rot_sigma: 0.15,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(self.mu > 0.0) {
            return Err(SamplingError::InvalidConfig("mu must be positive"));
        }
        if !(self.trans_sigma >= 0.0 && self.rot_sigma >= 0.0) {
            return Err(SamplingError::InvalidConfig("sigmas must be non-negative"));
        }
        if self.approach_rotations == 0 && self.n_surface_samples > 0 {
            return Err(SamplingError::InvalidConfig("approach_rotations must be at least 1"));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SAMPLE_STREAM: u64 = 1;
const PERTURB_STREAM: u64 = 2;

/// True when the segment between the contacts lies in both friction cones.
/// Normals may be given both outward or both inward.
pub fn is_antipodal(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3, mu: f64) -> Result<bool, SamplingError> {
    let d = p2 - p1;
    if d.norm() == 0.0 {
        return Err(SamplingError::ZeroLength);
    }
    let half = atan(mu);
    let inside = |a: &Vec3, b: &Vec3| angle_between(a, &d) <= half && angle_between(b, &(-d)) <= half;
    Ok(inside(n1, n2) || inside(&(-n1), &(-n2)))
}

/// Uniform direction (by solid angle) in the cone of half-angle `half` about `axis`.
fn sample_cone<R: Rng + ?Sized>(rng: &mut R, axis: &Vec3, half: f64) -> Vec3 {
    let cos_max = cos(half);
    let c = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
    let s = sqrt((1.0 - c * c).max(0.0));
    let phi = rng.random::<f64>() * core::f64::consts::TAU;
    let u = orthogonal_unit(axis);
    let v = axis.cross(&u);
    axis * c + (u * cos(phi) + v * sin(phi)) * s
}

/// TCP pose for a contact pair: closing axis `y` from `p1` to `p2`, approach
/// `z` turned by `angle` about `y`.
pub fn pair_pose(p1: &Vec3, p2: &Vec3, angle: f64) -> Pose {
    let y = (p2 - p1).normalize();
    let z0 = orthogonal_unit(&y);
    let z = axis_angle(&y, angle) * z0;
    let x = y.cross(&z);
    Pose { rotation: Mat3::from_columns(&[x, y, z]), translation: (p1 + p2) / 2.0 }
}

/// Antipodal seeds grown from surface sample `index`. Ids are left at 0.
pub fn sample_at(
    mesh: &TriangleMesh,
    cfg: &SamplerConfig,
    gripper: &GripperParams,
    index: usize,
) -> Vec<GraspCandidate> {
    let seed = derive_seed(cfg.rng_seed, SAMPLE_STREAM, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p1, n1, _) = mesh.sample_surface(&mut rng);
    let dir = sample_cone(&mut rng, &(-n1), atan(cfg.mu).min(core::f64::consts::FRAC_PI_2));
    let offset = rng.random::<f64>() * core::f64::consts::TAU;
    let Some(hit) = mesh.raycast(&p1, &dir, 1e-9, gripper.max_aperture * 1.5) else {
        return Vec::new();
    };
    let width = (hit.point - p1).norm();
    if width > gripper.max_aperture || width < 1e-6 {
        return Vec::new();
    }
    if !is_antipodal(&p1, &n1, &hit.point, &hit.normal, cfg.mu).unwrap_or(false) {
        return Vec::new();
    }
    let step = core::f64::consts::TAU / cfg.approach_rotations as f64;
    (0..cfg.approach_rotations)
        .map(|k| GraspCandidate {
            id: 0,
            pose: pair_pose(&p1, &hit.point, offset + step * k as f64),
            pre_width: width,
            provenance: Provenance::AntipodalSeed,
            seed,
        })
        .collect()
}

/// All antipodal seeds, numbered in sample order.
pub fn sample_antipodal_grasps(
    mesh: &TriangleMesh,
    cfg: &SamplerConfig,
    gripper: &GripperParams,
) -> Result<Vec<GraspCandidate>, SamplingError> {
    cfg.validate()?;
    let per_sample: Vec<Vec<GraspCandidate>> =
        (0..cfg.n_surface_samples).map(|i| sample_at(mesh, cfg, gripper, i)).collect();
    Ok(number_candidates(per_sample.into_iter().flatten()))
}

/// Assigns consecutive ids in iteration order.
pub fn number_candidates(candidates: impl IntoIterator<Item = GraspCandidate>) -> Vec<GraspCandidate> {
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            c.id = i as u64;
            c
        })
        .collect()
}

/// Right-composes a random rigid motion in the TCP frame.
pub fn perturb_grasp(candidate: &GraspCandidate, trans_sigma: f64, rot_sigma: f64, seed: u64) -> GraspCandidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * trans_sigma;
    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
    let angle = rng.sample::<f64, _>(StandardNormal) * rot_sigma;
    let delta = Pose { rotation: axis_angle(&Vec3::from(axis), angle), translation: t };
    GraspCandidate {
        id: candidate.id,
        pose: candidate.pose.compose(&delta),
        pre_width: candidate.pre_width,
        provenance: Provenance::Perturbed(candidate.id),
        seed,
    }
}

/// Seeds followed by `perturbations_per_seed` perturbations of each seed.
pub fn expand_with_perturbations(seeds: &[GraspCandidate], cfg: &SamplerConfig) -> Vec<GraspCandidate> {
    let k = cfg.perturbations_per_seed as u64;
    let perturbed = seeds.iter().flat_map(|c| {
        (0..k).map(move |j| {
            perturb_grasp(c, cfg.trans_sigma, cfg.rot_sigma, derive_seed(cfg.rng_seed, PERTURB_STREAM, c.id * k + j))
        })
    });
    number_candidates(seeds.iter().copied().chain(perturbed))
}
