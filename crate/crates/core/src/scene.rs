//! Cluttered tabletop scenes, scene-frame grasps and the scalar
//! gravity-rejection score.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::SettledGrasp;
use crate::geometry::{mesh_intersects, obb_below_plane, obb_intersects_mesh, Pose, TriangleMesh};
use crate::hand::{FingerState, GraspMode, GripperParams, HandError, Kinematics};
use crate::math::{axis_angle, Mat3, Vec3};
use crate::wrench::{DisturbanceRejectionScore, DIRECTIONS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("epsilon must lie in (0, 1/sqrt(3)]")]
    InvalidEpsilon,
    #[error("gravity direction must be a unit vector")]
    NonUnitGravity,
    #[error("no direction has a positive component along gravity")]
    NoContributingDirection,
    #[error("empty object library")]
    EmptyLibrary,
    #[error("object count must be between 1 and 5")]
    InvalidObjectCount,
    #[error("no grasp data for object `{0}`")]
    MissingGrasps(String),
    #[error("unknown mesh `{0}`")]
    UnknownMesh(String),
    #[error(transparent)]
    Hand(#[from] HandError),
}

/// Largest admissible epsilon: for any unit vector some ±axis has a
/// component of at least 1/sqrt(3).
pub const MAX_EPSILON: f64 = 0.577;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GravityProjectionParams {
    pub epsilon: f64,
}

impl Default for GravityProjectionParams {
    fn default() -> Self {
        Self { epsilon: 0.1 }
    }
}

impl GravityProjectionParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.epsilon > 0.0 && self.epsilon <= MAX_EPSILON {
            Ok(())
        } else {
            Err(SceneError::InvalidEpsilon)
        }
    }
}

/// `min_i forces[i] / (n_i · n_g)` over directions with `n_i · n_g > epsilon`.
pub fn gravity_rejection_general(
    directions: &[Vec3],
    forces: &[f64],
    n_g: &Vec3,
    epsilon: f64,
) -> Result<f64, SceneError> {
    if (n_g.norm() - 1.0).abs() > 1e-9 {
        return Err(SceneError::NonUnitGravity);
    }
    directions
        .iter()
        .zip(forces)
        .filter_map(|(n, f)| {
            let dot = n.dot(n_g);
            (dot > epsilon).then(|| f / dot)
        })
        .reduce(f64::min)
        .ok_or(SceneError::NoContributingDirection)
}

/// Gravity-rejection score over the fixed ±axis direction set.
pub fn gravity_rejection(
    score: &DisturbanceRejectionScore,
    n_g: &Vec3,
    params: &GravityProjectionParams,
) -> Result<f64, SceneError> {
    params.validate()?;
    let dirs = DIRECTIONS.map(Vec3::from);
    gravity_rejection_general(&dirs, &score.forces, n_g, params.epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub mesh_id: String,
    pub pose: Pose,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Half-space `z <= 0` is solid when set.
    pub table: bool,
    pub objects: Vec<SceneObject>,
    pub gravity: Vec3,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LibraryObject {
    pub id: String,
    pub mesh: TriangleMesh,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Object centers are drawn from `[-half, half]²`.
    pub workspace_half: f64,
    /// Minimum gap between placed objects [m].
    pub separation: f64,
    pub max_retries: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { workspace_half: 0.09, separation: 0.002, max_retries: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedScene {
    pub scene: Scene,
    /// Objects that could not be placed.
    pub dropped: usize,
}

/// Rotation putting object axis `face` (0..6 over ±x, ±y, ±z) down, then
/// turning by `yaw` about the world vertical.
fn resting_rotation(face: usize, yaw: f64) -> Mat3 {
    let down = Vec3::from(DIRECTIONS[face]);
    let target = -Vec3::z();
    let axis = down.cross(&target);
    let base = if axis.norm() > 1e-12 {
        axis_angle(&axis.normalize(), crate::math::acos(down.dot(&target)))
    } else if down.dot(&target) > 0.0 {
        Mat3::identity()
    } else {
        axis_angle(&Vec3::x(), core::f64::consts::PI)
    };
    axis_angle(&Vec3::z(), yaw) * base
}

/// Places up to `n_objects` library objects on the table at rejection-sampled
/// resting poses. Objects that cannot be placed after `max_retries` tries
/// are dropped and counted.
pub fn compose_scene(
    library: &[LibraryObject],
    n_objects: usize,
    seed: u64,
    cfg: &SceneConfig,
) -> Result<ComposedScene, SceneError> {
    if library.is_empty() {
        return Err(SceneError::EmptyLibrary);
    }
    if !(1..=5).contains(&n_objects) {
        return Err(SceneError::InvalidObjectCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects: Vec<SceneObject> = Vec::new();
    let mut placed: Vec<(usize, Pose)> = Vec::new();
    let mut dropped = 0;
    for _ in 0..n_objects {
        let li = rng.random_range(0..library.len());
        let lib = &library[li];
        let mut done = false;
        for _ in 0..cfg.max_retries {
            let rot = resting_rotation(rng.random_range(0..6), rng.random::<f64>() * core::f64::consts::TAU);
            let xy = Vec3::new(
                rng.random_range(-cfg.workspace_half..=cfg.workspace_half),
                rng.random_range(-cfg.workspace_half..=cfg.workspace_half),
                0.0,
            );
            let min_z = lib.mesh.vertices().iter().map(|v| (rot * v).z).fold(f64::INFINITY, f64::min);
            let centroid = rot * lib.mesh.centroid();
            let pose = Pose { rotation: rot, translation: Vec3::new(xy.x - centroid.x, xy.y - centroid.y, -min_z) };
            let clear = placed
                .iter()
                .all(|(other, op)| !mesh_intersects(&lib.mesh, &pose, &library[*other].mesh, op, cfg.separation));
            if clear {
                placed.push((li, pose));
                objects.push(SceneObject { mesh_id: lib.id.clone(), pose, mass: lib.mass });
                done = true;
                break;
            }
        }
        if !done {
            dropped += 1;
        }
    }
    Ok(ComposedScene { scene: Scene { table: true, objects, gravity: -Vec3::z(), seed }, dropped })
}

/// A settled grasp with its disturbance-rejection score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGrasp {
    pub settled: SettledGrasp,
    pub score: DisturbanceRejectionScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectGrasps {
    pub object_id: String,
    pub grasps: Vec<ScoredGrasp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGrasp {
    pub object_index: usize,
    pub candidate_id: u64,
    /// TCP in the world frame.
    pub pose: Pose,
    pub f_g: f64,
    pub width: f64,
    pub mode: GraspMode,
    pub finger_state: FingerState,
    pub valid: bool,
}

/// True when the hand at `tcp` (world frame) in `state` touches the table or
/// any scene object other than `skip`.
pub fn hand_collides(
    kin: &Kinematics,
    state: &FingerState,
    tcp: &Pose,
    scene: &Scene,
    meshes: &[&TriangleMesh],
    skip: Option<usize>,
) -> bool {
    let shapes = kin.configuration_unchecked(state).shapes();
    shapes.iter().any(|s| {
        let world = s.obb.transformed(tcp);
        if scene.table && obb_below_plane(&world, 0.0, 0.0) {
            return true;
        }
        scene
            .objects
            .iter()
            .zip(meshes)
            .enumerate()
            .any(|(k, (o, m))| Some(k) != skip && obb_intersects_mesh(&world.transformed(&o.pose.inverse()), m, 0.0))
    })
}

fn scene_meshes<'a>(scene: &Scene, library: &'a [LibraryObject]) -> Result<Vec<&'a TriangleMesh>, SceneError> {
    scene
        .objects
        .iter()
        .map(|o| {
            library
                .iter()
                .find(|l| l.id == o.mesh_id)
                .map(|l| &l.mesh)
                .ok_or_else(|| SceneError::UnknownMesh(o.mesh_id.clone()))
        })
        .collect()
}

/// Moves every object's grasps into the world frame and keeps those whose
/// hand clears the table and the other objects, both closed at the settled
/// configuration and fully open at the same pose. Output follows object
/// order, then the order of `per_object` grasps.
pub fn project_grasps(
    scene: &Scene,
    library: &[LibraryObject],
    per_object: &[ObjectGrasps],
    gripper: &GripperParams,
    params: &GravityProjectionParams,
) -> Result<Vec<SceneGrasp>, SceneError> {
    params.validate()?;
    let kin = gripper.kinematics()?;
    let meshes = scene_meshes(scene, library)?;
    let mut out = Vec::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        let data = per_object
            .iter()
            .find(|d| d.object_id == obj.mesh_id)
            .ok_or_else(|| SceneError::MissingGrasps(obj.mesh_id.clone()))?;
        let n_g = obj.pose.inverse_transform_vector(&scene.gravity).normalize();
        for g in &data.grasps {
            let pose = obj.pose.compose(&g.settled.hand_pose);
            if hand_collides(&kin, &g.settled.finger_state, &pose, scene, &meshes, Some(i))
                || hand_collides(&kin, &FingerState::open(), &pose, scene, &meshes, Some(i))
            {
                continue;
            }
            out.push(SceneGrasp {
                object_index: i,
                candidate_id: g.settled.candidate_id,
                pose,
                f_g: gravity_rejection(&g.score, &n_g, params)?,
                width: g.settled.width,
                mode: g.settled.mode,
                finger_state: g.settled.finger_state,
                valid: true,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{box_mesh, cylinder};
    use crate::hand::{detailed_link_geometry, ContactKind, ContactPoint, Link};
    use crate::math::sqrt;
    use proptest::prelude::*;

    fn score(f: [f64; 6]) -> DisturbanceRejectionScore {
        DisturbanceRejectionScore { forces: f }
    }

    const F: [f64; 6] = [10.0, 10.0, 10.0, 10.0, 5.0, 20.0];

    #[test]
    fn axis_aligned_gravity_uses_minus_z() {
        let f = gravity_rejection(&score(F), &-Vec3::z(), &GravityProjectionParams::default()).unwrap();
        assert_eq!(f, 20.0);
    }

    #[test]
    fn tilted_gravity_takes_the_minimum_ratio() {
        let h = sqrt(0.5);
        let f = gravity_rejection(&score(F), &Vec3::new(h, 0.0, -h), &GravityProjectionParams::default()).unwrap();
        assert!((f - 14.142135623730951).abs() < 1e-6, "{f}");
    }

    #[test]
    fn equal_forces_bound_from_below() {
        let c = 7.0;
        let s = score([c; 6]);
        let p = GravityProjectionParams::default();
        assert_eq!(gravity_rejection(&s, &Vec3::y(), &p).unwrap(), c);
        assert!(gravity_rejection(&s, &Vec3::new(1.0, 2.0, -2.0).normalize(), &p).unwrap() > c);
    }

    #[test]
    fn epsilon_is_validated() {
        for eps in [0.0, -0.1, 0.6] {
            let p = GravityProjectionParams { epsilon: eps };
            assert_eq!(gravity_rejection(&score(F), &-Vec3::z(), &p), Err(SceneError::InvalidEpsilon));
        }
    }

    #[test]
    fn general_direction_set_may_have_no_contributor() {
        let dirs = [Vec3::x(), Vec3::y()];
        let r = gravity_rejection_general(&dirs, &[1.0, 1.0], &-Vec3::z(), 0.1);
        assert_eq!(r, Err(SceneError::NoContributingDirection));
    }

    fn library() -> Vec<LibraryObject> {
        alloc::vec![
            LibraryObject { id: "cylinder".into(), mesh: cylinder(0.0325, 0.2, 32), mass: 0.3 },
            LibraryObject { id: "cube".into(), mesh: box_mesh(Vec3::new(0.025, 0.025, 0.025)), mass: 0.2 },
        ]
    }

    #[test]
    fn single_cylinder_rests_on_table() {
        let lib = library();
        let c = compose_scene(&lib[..1], 1, 3, &SceneConfig::default()).unwrap();
        let o = &c.scene.objects[0];
        let axis = o.pose.rotation * Vec3::z();
        assert!(axis.z.abs() > 1.0 - 1e-9 || axis.z.abs() < 1e-9);
        let min_z = lib[0].mesh.vertices().iter().map(|v| o.pose.transform_point(v).z).fold(f64::INFINITY, f64::min);
        assert!(min_z.abs() <= 1e-9);
    }

    #[test]
    fn scenes_are_seeded() {
        let lib = library();
        let a = compose_scene(&lib, 3, 9, &SceneConfig::default()).unwrap();
        let b = compose_scene(&lib, 3, 9, &SceneConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.scene, compose_scene(&lib, 3, 10, &SceneConfig::default()).unwrap().scene);
    }

    #[test]
    fn five_objects_do_not_overlap() {
        let lib = library();
        let c = compose_scene(&lib, 5, 1, &SceneConfig::default()).unwrap();
        let s = &c.scene;
        assert_eq!(s.objects.len() + c.dropped, 5);
        let meshes = scene_meshes(s, &lib).unwrap();
        for i in 0..s.objects.len() {
            for j in i + 1..s.objects.len() {
                assert!(!mesh_intersects(meshes[i], &s.objects[i].pose, meshes[j], &s.objects[j].pose, 0.0));
            }
        }
    }

    #[test]
    fn bad_object_counts_rejected() {
        assert_eq!(
            compose_scene(&library(), 0, 1, &SceneConfig::default()).unwrap_err(),
            SceneError::InvalidObjectCount
        );
        assert_eq!(
            compose_scene(&library(), 6, 1, &SceneConfig::default()).unwrap_err(),
            SceneError::InvalidObjectCount
        );
        assert_eq!(compose_scene(&[], 1, 1, &SceneConfig::default()).unwrap_err(), SceneError::EmptyLibrary);
    }

    /// Pinch on the cube with the TCP at `tcp` (object frame) approaching along `approach`.
    fn cube_grasp(id: u64, tcp: Vec3, approach: Vec3) -> ScoredGrasp {
        let y = Vec3::x();
        let z = approach.normalize();
        let rot = Mat3::from_columns(&[y.cross(&z), y, z]);
        let contact = |s: f64, link| ContactPoint {
            position: Vec3::new(s * 0.025, 0.0, 0.0),
            normal: Vec3::new(-s, 0.0, 0.0),
            link,
            kind: ContactKind::Squeeze,
        };
        ScoredGrasp {
            settled: SettledGrasp {
                candidate_id: id,
                hand_pose: Pose { rotation: rot, translation: tcp },
                finger_state: FingerState::symmetric(0.4, 0.0),
                contacts: alloc::vec![contact(1.0, Link::FingertipL), contact(-1.0, Link::FingertipR)],
                mode: GraspMode::Precision,
                width: 0.05,
            },
            score: score(F),
        }
    }

    fn cube_data() -> ObjectGrasps {
        ObjectGrasps {
            object_id: "cube".into(),
            grasps: alloc::vec![
                // From above.
                cube_grasp(0, Vec3::zeros(), -Vec3::z()),
                // From the side, sweeping below the table when the cube rests on it.
                cube_grasp(1, Vec3::new(0.0, 0.0, -0.02), Vec3::y()),
                // From -y, towards the neighbor in the two-object scene.
                cube_grasp(2, Vec3::zeros(), Vec3::y()),
            ],
        }
    }

    fn cube_at(x: f64) -> SceneObject {
        SceneObject { mesh_id: "cube".into(), pose: Pose::from_translation(Vec3::new(x, 0.0, 0.025)), mass: 0.2 }
    }

    #[test]
    fn floating_object_keeps_every_grasp() {
        let scene = Scene { table: false, objects: alloc::vec![cube_at(0.0)], gravity: -Vec3::z(), seed: 0 };
        let out = project_grasps(
            &scene,
            &library(),
            &[cube_data()],
            &GripperParams::default(),
            &GravityProjectionParams::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].f_g, 20.0);
    }

    #[test]
    fn table_removes_low_side_grasps() {
        let scene = Scene { table: true, objects: alloc::vec![cube_at(0.0)], gravity: -Vec3::z(), seed: 0 };
        let out = project_grasps(
            &scene,
            &library(),
            &[cube_data()],
            &GripperParams::default(),
            &GravityProjectionParams::default(),
        )
        .unwrap();
        let ids: Vec<u64> = out.iter().map(|g| g.candidate_id).collect();
        assert!(ids.contains(&0));
        assert!(!ids.contains(&1));
    }

    #[test]
    fn neighbor_blocks_gap_side_grasps() {
        let mut objects = alloc::vec![cube_at(0.0), cube_at(0.0)];
        objects[1].pose.translation.y = -0.07;
        let scene = Scene { table: false, objects, gravity: -Vec3::z(), seed: 0 };
        let out = project_grasps(
            &scene,
            &library(),
            &[cube_data()],
            &GripperParams::default(),
            &GravityProjectionParams::default(),
        )
        .unwrap();
        // Grasp 2 on the first cube approaches through the gap, into the neighbor.
        assert!(!out.iter().any(|g| g.object_index == 0 && g.candidate_id == 2));
        assert!(out.iter().any(|g| g.object_index == 0 && g.candidate_id == 0));
        // Every kept grasp also clears the detailed link geometry.
        let lib = library();
        let meshes = scene_meshes(&scene, &lib).unwrap();
        let kin = GripperParams::default().kinematics().unwrap();
        for g in &out {
            let hand = kin.configuration(&g.finger_state).unwrap();
            for link in detailed_link_geometry(&hand) {
                let m = link.obb.to_mesh();
                for (k, o) in scene.objects.iter().enumerate() {
                    if k != g.object_index {
                        assert!(!mesh_intersects(&m, &g.pose, meshes[k], &o.pose, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn missing_object_data_is_an_error() {
        let scene = Scene { table: true, objects: alloc::vec![cube_at(0.0)], gravity: -Vec3::z(), seed: 0 };
        let r = project_grasps(&scene, &library(), &[], &GripperParams::default(), &GravityProjectionParams::default());
        assert_eq!(r.unwrap_err(), SceneError::MissingGrasps("cube".into()));
    }

    proptest! {
        #[test]
        fn contributing_set_never_empty(v in prop::array::uniform3(-1.0f64..1.0), eps in 0.001f64..0.577) {
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-3);
            let p = GravityProjectionParams { epsilon: eps };
            prop_assert!(gravity_rejection(&score(F), &v.normalize(), &p).is_ok());
        }

        #[test]
        fn homogeneous_in_forces(v in prop::array::uniform3(-1.0f64..1.0), k in 0.01f64..100.0) {
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-3);
            let n = v.normalize();
            let p = GravityProjectionParams::default();
            let a = gravity_rejection(&score(F), &n, &p).unwrap();
            let b = gravity_rejection(&score(F.map(|f| f * k)), &n, &p).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn axis_permutations_preserve_the_score(v in prop::array::uniform3(-1.0f64..1.0), perm in 0usize..6, flips in 0u8..8) {
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-3);
            let n = v.normalize();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let pm = perms[perm];
            let sign = |a: usize| if flips & (1 << a) != 0 { -1.0 } else { 1.0 };
            // Signed axis permutation applied to gravity and to the direction labels.
            let mut n2 = Vec3::zeros();
            let mut f2 = [0.0; 6];
            for a in 0..3 {
                n2[pm[a]] = sign(a) * n[a];
                for (s, off) in [(1.0, 0), (-1.0, 1)] {
                    let target = 2 * pm[a] + if s * sign(a) > 0.0 { 0 } else { 1 };
                    f2[target] = F[2 * a + off];
                }
            }
            let p = GravityProjectionParams::default();
            let a = gravity_rejection(&score(F), &n, &p).unwrap();
            let b = gravity_rejection(&score(f2), &n2, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
