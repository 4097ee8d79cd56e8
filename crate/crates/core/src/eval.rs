//! Clearing episodes with pluggable detectors, quasi-static lift checks and
//! SR/CR metrics.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{annotate_scene, reconstruct_rotation, BasisOrder};
use crate::closure::{simulate_closure, ClosureConfig, ClosureFailure, ClosureObject};
use crate::geometry::{
    default_truncation, integrate_tsdf, render_depth, CameraModel, DepthNoise, GridSpec, Pose, VoxelVolume,
    OBSERVED_CHANNEL, TSDF_CHANNEL,
};
use crate::hand::{ContactPoint, FingerState, GripperParams, Kinematics};
use crate::math::{Mat3, Vec3, STANDARD_GRAVITY};
use crate::sampling::{GraspCandidate, Provenance};
use crate::scene::{hand_collides, project_grasps, GravityProjectionParams, LibraryObject, ObjectGrasps, Scene};
use crate::wrench::{max_resisted_force, ContactForceLimits, SearchConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("weights must be non-empty and positive")]
    InvalidWeights,
    #[error("unknown mesh `{0}`")]
    UnknownMesh(alloc::string::String),
    #[error("invalid gripper: {0}")]
    Gripper(#[from] crate::hand::HandError),
}

/// What a detector sees at each step.
pub struct Observation<'a> {
    pub tsdf: &'a VoxelVolume,
    pub gravity: Vec3,
    /// Ground truth, for oracle and scripted detectors only.
    pub scene: &'a Scene,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// TCP in the world frame.
    pub pose: Pose,
    pub width: f64,
    pub score: f64,
}

/// Returns grasps ranked best first; an empty list is a detection failure.
pub trait Detector {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection>;

    /// Fixed lift result for scripted fixtures; `None` runs the physics.
    fn scripted_outcome(&self) -> Option<bool> {
        None
    }
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection> {
        (**self).detect(obs)
    }

    fn scripted_outcome(&self) -> Option<bool> {
        (**self).scripted_outcome()
    }
}

/// Targets the first remaining object and reports a fixed outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptedOutcome {
    pub success: bool,
}

impl Detector for ScriptedOutcome {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection> {
        obs.scene
            .objects
            .first()
            .map(|o| {
                alloc::vec![Detection { pose: Pose::from_translation(o.pose.translation), width: 0.0, score: 1.0 }]
            })
            .unwrap_or_default()
    }

    fn scripted_outcome(&self) -> Option<bool> {
        Some(self.success)
    }
}

/// Test fixture driven by a closure.
pub struct ScriptedDetector<F>(pub F);

impl<F: FnMut(&Observation<'_>) -> Vec<Detection>> Detector for ScriptedDetector<F> {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection> {
        (self.0)(obs)
    }
}

/// Reads the ground-truth annotation of the current scene and ranks valid
/// voxels by `f_g`. Poses sit at voxel centers with the `ExEz` decoded
/// rotation.
pub struct OracleDetector<'a> {
    pub library: &'a [LibraryObject],
    pub grasps: &'a [ObjectGrasps],
    pub gripper: GripperParams,
    pub projection: GravityProjectionParams,
    pub grid: GridSpec,
}

impl Detector for OracleDetector<'_> {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection> {
        let Ok(projected) = project_grasps(obs.scene, self.library, self.grasps, &self.gripper, &self.projection)
        else {
            return Vec::new();
        };
        let Ok(ann) = annotate_scene(&projected, &self.grid, BasisOrder::ExEz) else {
            return Vec::new();
        };
        let mut out: Vec<Detection> = ann
            .valid_labels()
            .filter_map(|l| {
                let rotation = reconstruct_rotation(&l.rotation).ok()?;
                Some(Detection {
                    pose: Pose { rotation, translation: self.grid.voxel_center(l.index) },
                    width: l.width,
                    score: l.f_g,
                })
            })
            .collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score));
        out
    }
}

/// Pinches the highest observed surface from above, centered on its top face
/// and closing across the face's narrowest horizontal extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopDownDetector {
    /// Surface band below the top point used to fit the patch [m].
    pub patch_depth: f64,
    pub patch_radius: f64,
    /// Band below the top point taken as the top face [m].
    pub cap_band: f64,
    /// Fingertip center depth below the top point [m].
    pub grasp_depth: f64,
    pub distal_length: f64,
}

impl Default for TopDownDetector {
    fn default() -> Self {
        Self {
            patch_depth: 0.04,
            patch_radius: 0.06,
            cap_band: 0.012,
            grasp_depth: 0.02,
            distal_length: GripperParams::default().distal_length,
        }
    }
}

impl Detector for TopDownDetector {
    fn detect(&mut self, obs: &Observation<'_>) -> Vec<Detection> {
        let (Some(tsdf), Some(seen)) = (obs.tsdf.channel(TSDF_CHANNEL), obs.tsdf.channel(OBSERVED_CHANNEL)) else {
            return Vec::new();
        };
        let grid = obs.tsdf.grid;
        let surface: Vec<Vec3> = (0..grid.len())
            .filter(|&i| seen[i] == 1.0 && tsdf[i].abs() < 0.25)
            .map(|i| grid.voxel_center(grid.unravel(i)))
            .filter(|p| p.z > grid.voxel_size)
            .collect();
        let Some(top) = surface.iter().copied().max_by(|a, b| a.z.total_cmp(&b.z)) else {
            return Vec::new();
        };
        let patch: Vec<Vec3> = surface
            .iter()
            .copied()
            .filter(|p| p.z > top.z - self.patch_depth && (p.xy() - top.xy()).norm() < self.patch_radius)
            .collect();
        // The top face is seen whole from above; side walls only partly.
        let cap: Vec<Vec3> = patch.iter().copied().filter(|p| p.z > top.z - self.cap_band).collect();
        let n = cap.len() as f64;
        let c = cap.iter().fold(nalgebra::Vector2::zeros(), |s, p| s + p.xy()) / n;
        let cov = cap.iter().fold(nalgebra::Matrix2::zeros(), |s, p| {
            let d = p.xy() - c;
            s + d * d.transpose()
        }) / n;
        let eig = cov.symmetric_eigen();
        let minor = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
        let depth = self.grasp_depth.min(top.z - self.distal_length / 2.0 - 0.005).max(0.0);
        let center = Vec3::new(c.x, c.y, top.z - depth);
        [minor, 1 - minor]
            .iter()
            .enumerate()
            .map(|(rank, &k)| {
                let e = eig.eigenvectors.column(k);
                let y = Vec3::new(e[0], e[1], 0.0).normalize();
                let z = -Vec3::z();
                let extent = patch
                    .iter()
                    .map(|p| (p - center).dot(&y))
                    .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
                Detection {
                    pose: Pose { rotation: Mat3::from_columns(&[y.cross(&z), y, z]), translation: center },
                    width: extent.1 - extent.0 + grid.voxel_size,
                    score: 1.0 / (rank + 1) as f64,
                }
            })
            .collect()
    }
}

/// Meshes, closure samplers and physics settings shared by every episode.
pub struct EvalContext<'a> {
    pub library: &'a [LibraryObject],
    objects: Vec<ClosureObject<'a>>,
    pub gripper: GripperParams,
    kinematics: Kinematics,
    pub closure: ClosureConfig,
    pub limits: ContactForceLimits,
    pub search: SearchConfig,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        library: &'a [LibraryObject],
        gripper: GripperParams,
        closure: ClosureConfig,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            library,
            objects: library.iter().map(|l| ClosureObject::new(&l.mesh, closure.point_spacing)).collect(),
            kinematics: gripper.kinematics()?,
            limits: ContactForceLimits::from_gripper(&gripper),
            gripper,
            closure,
            search: SearchConfig::default(),
        })
    }

    fn library_index(&self, id: &str) -> Result<usize, EvalError> {
        self.library.iter().position(|l| l.id == id).ok_or_else(|| EvalError::UnknownMesh(id.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    DetectionFailure,
    Unreachable,
    NoContact,
    Ejected,
    InitialPenetration,
    GravityExceeded,
    ClosureError,
}

impl From<&ClosureFailure> for FailureReason {
    fn from(f: &ClosureFailure) -> Self {
        match f {
            ClosureFailure::NoContact => Self::NoContact,
            ClosureFailure::Ejected => Self::Ejected,
            ClosureFailure::InitialPenetration => Self::InitialPenetration,
            _ => Self::ClosureError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOutcome {
    pub success: bool,
    pub reason: Option<FailureReason>,
    /// Largest force along gravity the settled grasp holds [N].
    pub resisted: f64,
}

/// Success iff the resisted force along gravity covers the weight.
pub fn judge_lift(resisted: f64, mass: f64) -> LiftOutcome {
    let ok = resisted >= mass * STANDARD_GRAVITY;
    LiftOutcome { success: ok, reason: (!ok).then_some(FailureReason::GravityExceeded), resisted }
}

/// Index of the object whose surface is nearest the TCP.
fn target_object(ctx: &EvalContext<'_>, scene: &Scene, tcp: &Vec3) -> Option<usize> {
    scene
        .objects
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            let li = ctx.library_index(&o.mesh_id).ok()?;
            Some((i, ctx.library[li].mesh.distance(&o.pose.inverse_transform_point(tcp)).distance))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Contacts within this distance of one line act as a hinge [m].
const HINGE_TOLERANCE: f64 = 2e-3;

/// Gravity in the object frame after the object has swung about a hinge
/// formed by collinear contacts until its center of mass hangs below the
/// hinge line. Unchanged when the contacts do not form a hinge.
pub fn hanging_gravity(contacts: &[ContactPoint], com: &Vec3, n_g: &Vec3) -> Vec3 {
    let [first, rest @ ..] = contacts else {
        return *n_g;
    };
    let Some(far) = rest
        .iter()
        .max_by(|a, b| (a.position - first.position).norm().total_cmp(&(b.position - first.position).norm()))
    else {
        return *n_g;
    };
    let axis = far.position - first.position;
    if axis.norm() < HINGE_TOLERANCE {
        return *n_g;
    }
    let axis = axis.normalize();
    let off_line = |p: &Vec3| {
        let d = p - first.position;
        (d - axis * axis.dot(&d)).norm()
    };
    if contacts.iter().any(|c| off_line(&c.position) > HINGE_TOLERANCE) {
        return *n_g;
    }
    let arm = com - first.position;
    let arm = arm - axis * axis.dot(&arm);
    let across = n_g - axis * axis.dot(n_g);
    if arm.norm() < 1e-9 || across.norm() < 1e-9 {
        return *n_g;
    }
    axis * axis.dot(n_g) + arm.normalize() * across.norm()
}

/// Closes the hand at `tcp` (world frame) on object `index` and checks the
/// grasp holds the object's weight along the scene gravity, after any
/// swing about a contact hinge.
pub fn simulate_lift(
    ctx: &EvalContext<'_>,
    scene: &Scene,
    index: usize,
    tcp: &Pose,
    mass: f64,
) -> Result<LiftOutcome, EvalError> {
    let obj = &scene.objects[index];
    let li = ctx.library_index(&obj.mesh_id)?;
    let candidate = GraspCandidate {
        id: 0,
        pose: obj.pose.inverse().compose(tcp),
        pre_width: ctx.gripper.max_aperture,
        provenance: Provenance::AntipodalSeed,
        seed: 0,
    };
    let settled = match simulate_closure(&ctx.gripper, &ctx.objects[li], &candidate, &ctx.closure) {
        Ok(s) => s,
        Err(e) => return Ok(LiftOutcome { success: false, reason: Some((&e).into()), resisted: 0.0 }),
    };
    let n_g = obj.pose.inverse_transform_vector(&scene.gravity).normalize();
    let n_g = hanging_gravity(&settled.contacts, &ctx.objects[li].com, &n_g);
    let resisted =
        max_resisted_force(&settled.contacts, &ctx.objects[li].com, &n_g, &ctx.limits, &ctx.search).unwrap_or(0.0);
    Ok(judge_lift(resisted, mass))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub camera: CameraModel,
    pub grid: GridSpec,
    pub truncation: f64,
    pub noise: Option<DepthNoise>,
    /// Free approach distance behind the grasp pose [m].
    pub approach_clearance: f64,
    pub approach_step: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        Self {
            camera: CameraModel::default_scene_camera(),
            grid,
            truncation: default_truncation(&grid),
            noise: None,
            approach_clearance: 0.1,
            approach_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub grasp: Option<Detection>,
    /// Index into the scene as it was at the start of the episode.
    pub object: Option<usize>,
    pub success: bool,
    pub reason: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scene_seed: u64,
    pub trials: Vec<Trial>,
    pub objects_total: usize,
    pub objects_cleared: usize,
}

impl EpisodeRecord {
    pub fn successes(&self) -> usize {
        self.trials.iter().filter(|t| t.success).count()
    }
}

/// Open hand swept back along its approach axis clears the table and every
/// object except the target.
fn reachable(
    ctx: &EvalContext<'_>,
    scene: &Scene,
    meshes: &[&crate::geometry::TriangleMesh],
    target: usize,
    tcp: &Pose,
    cfg: &EpisodeConfig,
) -> bool {
    let approach = tcp.rotation.column(2).into_owned();
    let steps = crate::math::ceil(cfg.approach_clearance / cfg.approach_step) as usize;
    (0..=steps).all(|k| {
        let d = (k as f64 * cfg.approach_step).min(cfg.approach_clearance);
        let pose = Pose { rotation: tcp.rotation, translation: tcp.translation - approach * d };
        !hand_collides(&ctx.kinematics, &FingerState::open(), &pose, scene, meshes, Some(target))
    })
}

/// Clears a scene: observe, detect, execute the first reachable detection,
/// remove the object on success. Stops when the scene is empty or after
/// two consecutive failed trials; detection failures count as trials.
pub fn run_episode<D: Detector + ?Sized>(
    scene: &Scene,
    ctx: &EvalContext<'_>,
    detector: &mut D,
    cfg: &EpisodeConfig,
) -> Result<EpisodeRecord, EvalError> {
    let mut current = scene.clone();
    let mut original: Vec<usize> = (0..scene.objects.len()).collect();
    let mut trials = Vec::new();
    let mut cleared = 0;
    let mut consecutive = 0;
    while !current.objects.is_empty() && consecutive < 2 {
        let meshes: Vec<&crate::geometry::TriangleMesh> = current
            .objects
            .iter()
            .map(|o| ctx.library_index(&o.mesh_id).map(|i| &ctx.library[i].mesh))
            .collect::<Result<_, _>>()?;
        let posed: Vec<_> = meshes.iter().zip(&current.objects).map(|(m, o)| (*m, o.pose)).collect();
        let depth = render_depth(&posed, &cfg.camera, cfg.noise);
        let Ok(tsdf) = integrate_tsdf(&depth, &cfg.camera, &cfg.grid, cfg.truncation) else {
            break;
        };
        let detections =
            detector.detect(&Observation { tsdf: &tsdf.volume, gravity: current.gravity, scene: &current });
        let mut trial =
            Trial { grasp: None, object: None, success: false, reason: Some(FailureReason::DetectionFailure) };
        if let (Some(ok), Some(d)) = (detector.scripted_outcome(), detections.first()) {
            if let Some(t) = target_object(ctx, &current, &d.pose.translation) {
                trial = Trial {
                    grasp: Some(*d),
                    object: Some(original[t]),
                    success: ok,
                    reason: (!ok).then_some(FailureReason::GravityExceeded),
                };
                if ok {
                    current.objects.remove(t);
                    original.remove(t);
                    cleared += 1;
                }
            }
        } else if !detections.is_empty() {
            trial.reason = Some(FailureReason::Unreachable);
            let chosen = detections.iter().find_map(|d| {
                let t = target_object(ctx, &current, &d.pose.translation)?;
                reachable(ctx, &current, &meshes, t, &d.pose, cfg).then_some((d, t))
            });
            if let Some((d, t)) = chosen {
                let lift = simulate_lift(ctx, &current, t, &d.pose, current.objects[t].mass)?;
                trial =
                    Trial { grasp: Some(*d), object: Some(original[t]), success: lift.success, reason: lift.reason };
                if lift.success {
                    current.objects.remove(t);
                    original.remove(t);
                    cleared += 1;
                }
            }
        }
        consecutive = if trial.success { 0 } else { consecutive + 1 };
        trials.push(trial);
    }
    Ok(EpisodeRecord { scene_seed: scene.seed, trials, objects_total: scene.objects.len(), objects_cleared: cleared })
}

/// One row of the results table. Ratios are percentages, absent when their
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub weight_kg: f64,
    pub trials: usize,
    pub successes: usize,
    pub objects: usize,
    pub sr: Option<f64>,
    pub cr: Option<f64>,
}

pub fn compute_metrics(records: &[EpisodeRecord], weight_kg: f64) -> MetricsRow {
    let trials = records.iter().map(|r| r.trials.len()).sum();
    let successes = records.iter().map(EpisodeRecord::successes).sum();
    let objects = records.iter().map(|r| r.objects_total).sum();
    let pct = |n: usize, d: usize| (d > 0).then(|| 100.0 * n as f64 / d as f64);
    MetricsRow { weight_kg, trials, successes, objects, sr: pct(successes, trials), cr: pct(successes, objects) }
}

/// Copy of `scene` with every object's mass set to `weight_kg`.
pub fn with_mass(scene: &Scene, weight_kg: f64) -> Scene {
    let mut s = scene.clone();
    for o in &mut s.objects {
        o.mass = weight_kg;
    }
    s
}

/// Runs every scene at every weight with a fresh detector per episode.
pub fn weight_sweep<D: Detector, F: FnMut() -> D>(
    scenes: &[Scene],
    weights: &[f64],
    ctx: &EvalContext<'_>,
    cfg: &EpisodeConfig,
    mut make_detector: F,
) -> Result<Vec<MetricsRow>, EvalError> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(EvalError::InvalidWeights);
    }
    weights
        .iter()
        .map(|&w| {
            let records = scenes
                .iter()
                .map(|s| run_episode(&with_mass(s, w), ctx, &mut make_detector(), cfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(compute_metrics(&records, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::box_mesh;
    use crate::scene::SceneObject;

    fn cube_library() -> Vec<LibraryObject> {
        alloc::vec![LibraryObject { id: "cube".into(), mesh: box_mesh(Vec3::new(0.025, 0.025, 0.025)), mass: 0.1 }]
    }

    fn cube_scene(n: usize) -> Scene {
        Scene {
            table: true,
            objects: (0..n)
                .map(|i| SceneObject {
                    mesh_id: "cube".into(),
                    pose: Pose::from_translation(Vec3::new(-0.09 + 0.09 * i as f64, 0.0, 0.025)),
                    mass: 0.1,
                })
                .collect(),
            gravity: -Vec3::z(),
            seed: 5,
        }
    }

    /// Top-down pinch across x on the first remaining object.
    fn first_object_pinch(obs: &Observation<'_>) -> Vec<Detection> {
        obs.scene
            .objects
            .first()
            .map(|o| {
                let y = Vec3::x();
                let z = -Vec3::z();
                alloc::vec![Detection {
                    pose: Pose {
                        rotation: Mat3::from_columns(&[y.cross(&z), y, z]),
                        translation: o.pose.translation + Vec3::new(0.0, 0.0, 0.01),
                    },
                    width: 0.05,
                    score: 1.0,
                }]
            })
            .unwrap_or_default()
    }

    fn ctx(lib: &[LibraryObject]) -> EvalContext<'_> {
        EvalContext::new(lib, GripperParams::default(), ClosureConfig::default()).unwrap()
    }

    #[test]
    fn judge_lift_examples() {
        assert!(judge_lift(5.0, 0.4).success);
        let fail = judge_lift(5.0, 0.6);
        assert!(!fail.success);
        assert_eq!(fail.reason, Some(FailureReason::GravityExceeded));
    }

    #[test]
    fn lift_far_from_the_object_has_no_contact() {
        let lib = cube_library();
        let c = ctx(&lib);
        let scene = cube_scene(1);
        let mut tcp = first_object_pinch(&Observation {
            tsdf: &VoxelVolume::new(GridSpec::default()).unwrap(),
            gravity: scene.gravity,
            scene: &scene,
        })[0]
            .pose;
        tcp.translation.z += 0.5;
        let out = simulate_lift(&c, &scene, 0, &tcp, 0.1).unwrap();
        assert_eq!(out.reason, Some(FailureReason::NoContact));
    }

    #[test]
    fn scripted_success_clears_three_objects() {
        let lib = cube_library();
        let c = ctx(&lib);
        let rec = run_episode(&cube_scene(3), &c, &mut ScriptedDetector(first_object_pinch), &EpisodeConfig::default())
            .unwrap();
        assert_eq!((rec.objects_cleared, rec.trials.len()), (3, 3));
    }

    #[test]
    fn failing_detector_stops_after_two_trials() {
        let lib = cube_library();
        let c = ctx(&lib);
        let rec = run_episode(
            &cube_scene(3),
            &c,
            &mut ScriptedDetector(|_: &Observation<'_>| Vec::new()),
            &EpisodeConfig::default(),
        )
        .unwrap();
        assert_eq!((rec.objects_cleared, rec.trials.len()), (0, 2));
        assert!(rec.trials.iter().all(|t| t.reason == Some(FailureReason::DetectionFailure)));
    }

    #[test]
    fn scripted_outcomes_bypass_physics() {
        let lib = cube_library();
        let c = ctx(&lib);
        let heavy = with_mass(&cube_scene(3), 100.0);
        let rec = run_episode(&heavy, &c, &mut ScriptedOutcome { success: true }, &EpisodeConfig::default()).unwrap();
        assert_eq!((rec.objects_cleared, rec.trials.len()), (3, 3));
        let rec = run_episode(&heavy, &c, &mut ScriptedOutcome { success: false }, &EpisodeConfig::default()).unwrap();
        assert_eq!((rec.objects_cleared, rec.trials.len()), (0, 2));
    }

    #[test]
    fn heavy_objects_exceed_the_grasp() {
        let lib = cube_library();
        let c = ctx(&lib);
        let rec = run_episode(
            &with_mass(&cube_scene(1), 20.0),
            &c,
            &mut ScriptedDetector(first_object_pinch),
            &EpisodeConfig::default(),
        )
        .unwrap();
        assert_eq!(rec.objects_cleared, 0);
        assert_eq!(rec.trials[0].reason, Some(FailureReason::GravityExceeded));
    }

    #[test]
    fn topdown_detector_picks_a_lone_cube() {
        let lib = cube_library();
        let c = ctx(&lib);
        let rec = run_episode(&cube_scene(1), &c, &mut TopDownDetector::default(), &EpisodeConfig::default()).unwrap();
        assert_eq!(rec.objects_cleared, 1, "{:?}", rec.trials);
    }

    #[test]
    fn hinge_turns_gravity_towards_the_com() {
        let pinch = crate::wrench::tests::pinch(0.03);
        let com = Vec3::new(0.01, 0.0, 0.0);
        let g = hanging_gravity(&pinch, &com, &-Vec3::z());
        assert!((g - Vec3::x()).norm() < 1e-12, "{g}");
        // COM on the hinge line: nothing swings.
        assert_eq!(hanging_gravity(&pinch, &Vec3::zeros(), &-Vec3::z()), -Vec3::z());
        // Gravity along the hinge is unaffected.
        assert!((hanging_gravity(&pinch, &com, &Vec3::y()) - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn off_center_pinch_lifts_after_swinging() {
        let lib = cube_library();
        let c = ctx(&lib);
        let scene = cube_scene(1);
        let mut tcp = first_object_pinch(&Observation {
            tsdf: &VoxelVolume::new(GridSpec::default()).unwrap(),
            gravity: scene.gravity,
            scene: &scene,
        })[0]
            .pose;
        tcp.translation.y += 0.008;
        let out = simulate_lift(&c, &scene, 0, &tcp, 1.0).unwrap();
        assert!(out.success, "{out:?}");
    }

    #[test]
    fn metrics_examples() {
        let rec = |trials: usize, ok: usize, objects: usize| EpisodeRecord {
            scene_seed: 0,
            trials: (0..trials).map(|i| Trial { grasp: None, object: None, success: i < ok, reason: None }).collect(),
            objects_total: objects,
            objects_cleared: ok,
        };
        let m = compute_metrics(&[rec(6, 4, 5), rec(4, 3, 3)], 0.5);
        assert_eq!((m.sr, m.cr), (Some(70.0), Some(87.5)));
        let m = compute_metrics(&[rec(2, 0, 3)], 0.5);
        assert_eq!((m.sr, m.cr), (Some(0.0), Some(0.0)));
        assert_eq!(compute_metrics(&[rec(0, 0, 0)], 0.5).sr, None);
    }

    #[test]
    fn sweep_rows_follow_weights() {
        let lib = cube_library();
        let c = ctx(&lib);
        let weights: Vec<f64> = (0..8).map(|i| 0.1 + 0.2 * i as f64).collect();
        let rows = weight_sweep(&[cube_scene(1)], &weights, &c, &EpisodeConfig::default(), || {
            ScriptedDetector(first_object_pinch)
        })
        .unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.sr == Some(100.0) && r.cr == Some(100.0)));
        assert_eq!(
            weight_sweep(&[], &[], &c, &EpisodeConfig::default(), || ScriptedDetector(first_object_pinch)),
            Err(EvalError::InvalidWeights)
        );
    }
}
