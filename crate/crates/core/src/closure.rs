//! Gravityless quasi-static closure of the gripper on a free-floating object.
//!
//! The object is represented by a fixed set of surface points. Every closure
//! increment advances the actuator command and then minimizes
//!
//! ```text
//! E = Σ kc/2 d²                       (points inside a link box, d < 0)
//!   + Σ ka/2 (c - stroke·p - λ·w)²    (series actuator spring per finger)
//!   + Σ (τ_pre·w + kw/2 w²)           (preloaded distal spring)
//! ```
//!
//! over the object twist and the four finger coordinates with a bounded
//! Levenberg-Marquardt iteration. The distal link only curls once the
//! actuator force times the lever `λ` beats the preload and whatever the
//! pad itself is pushing against, which is what produces enveloping grasps
//! when a proximal link is blocked.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Pose, TriangleMesh};
use crate::hand::{
    classify_grasp_mode, contact_regions, ContactKind, ContactPoint, FingerState, GraspMode, GripperParams, HandError,
    Kinematics, Link, Side,
};
use crate::math::{axis_angle, ceil, floor, reorthonormalize, rotation_vector, Mat3, Vec3};
use crate::sampling::GraspCandidate;

type Mat10 = SMatrix<f64, 10, 10>;
type Vec10 = SVector<f64, 10>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosureFailure {
    #[error("hand closed without touching the object")]
    NoContact,
    #[error("object pushed out of the hand")]
    Ejected,
    #[error("hand penetrates the object before closing")]
    InitialPenetration,
    #[error(transparent)]
    Hand(#[from] HandError),
    #[error("invalid closure config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureConfig {
    /// Command increment as a fraction of the single-finger stroke.
    pub step_fraction: f64,
    /// Settling stops when an iteration moves nothing by more than this [m].
    pub settle_tolerance: f64,
    pub max_settle_iterations: usize,
    /// Penalty stiffness per surface point [N/m].
    pub contact_stiffness: f64,
    /// Series spring between the actuator and the linkage [N/m].
    pub actuator_stiffness: f64,
    /// Actuator travel per radian of distal curl [m].
    pub wrap_lever: f64,
    /// Distal return spring [N·m/rad].
    pub wrap_stiffness: f64,
    /// Distal preload as a fraction of `grasp_force · wrap_lever`.
    pub wrap_preload: f64,
    /// Object surface point spacing [m].
    pub point_spacing: f64,
    /// Largest admissible penetration at the start of closure [m].
    pub contact_tolerance: f64,
    /// Regions carrying less penalty force are ignored [N].
    pub min_region_force: f64,
    /// Object center displacement that counts as ejection [m].
    pub eject_distance: f64,
    /// Weak spring tying the object to its starting pose, a stand-in for
    /// static friction along directions no contact constrains [N/m].
    pub tether_stiffness: f64,
    /// Rotational counterpart of the tether [N·m/rad].
    pub tether_torsion: f64,
    /// Largest motion of any coordinate in one settle iteration [m].
    pub max_iteration_step: f64,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            step_fraction: 0.005,
            settle_tolerance: 1e-6,
            max_settle_iterations: 40,
            contact_stiffness: 1e6,
            actuator_stiffness: 2e4,
            wrap_lever: 0.01,
            wrap_stiffness: 0.2,
            wrap_preload: 0.25,
            point_spacing: 0.0025,
            contact_tolerance: 1e-4,
            min_region_force: 0.5,
            eject_distance: 0.04,
            tether_stiffness: 100.0,
            tether_torsion: 0.5,
            max_iteration_step: 5e-4,
        }
    }
}

impl ClosureConfig {
    pub fn validate(&self) -> Result<(), ClosureFailure> {
        let positive = [
            self.step_fraction,
            self.settle_tolerance,
            self.contact_stiffness,
            self.actuator_stiffness,
            self.wrap_lever,
            self.wrap_stiffness,
            self.point_spacing,
            self.contact_tolerance,
            self.eject_distance,
            self.max_iteration_step,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ClosureFailure::InvalidConfig("gains, steps and tolerances must be positive"));
        }
        if self.step_fraction > 0.5 || self.max_settle_iterations == 0 {
            return Err(ClosureFailure::InvalidConfig("step_fraction <= 0.5 and at least one settle iteration"));
        }
        if !(self.wrap_preload >= 0.0
            && self.min_region_force >= 0.0
            && self.tether_stiffness >= 0.0
            && self.tether_torsion >= 0.0)
        {
            return Err(ClosureFailure::InvalidConfig("wrap_preload and min_region_force must be non-negative"));
        }
        Ok(())
    }
}

/// A penetrating surface point after settling, in the object frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub link: Link,
    /// Penalty force carried by the point [N].
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettledGrasp {
    pub candidate_id: u64,
    /// Refined TCP pose in the object frame.
    pub hand_pose: Pose,
    pub finger_state: FingerState,
    pub contacts: Vec<ContactPoint>,
    pub mode: GraspMode,
    pub width: f64,
}

/// Uniform bins over a point set.
#[derive(Debug, Clone)]
struct PointGrid {
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl PointGrid {
    fn new(points: &[Vec3], bounds: &Aabb, cell: f64) -> Self {
        let ext = bounds.extent();
        let dims = [0, 1, 2].map(|i| (ceil(ext[i] / cell) as usize).max(1));
        let n = dims[0] * dims[1] * dims[2];
        let mut grid =
            Self { origin: bounds.min, cell, dims, starts: alloc::vec![0; n + 1], items: alloc::vec![0; points.len()] };
        let cells: Vec<usize> = points.iter().map(|p| grid.linear(grid.cell_of(p))).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for i in 0..n {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|i| {
            let f = floor((p[i] - self.origin[i]) / self.cell);
            (f.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn linear(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn for_each_in(&self, query: &Aabb, mut f: impl FnMut(usize)) {
        let lo = self.cell_of(&query.min);
        let hi = self.cell_of(&query.max);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let c = self.linear([x, y, z]);
                    for &i in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                        f(i as usize);
                    }
                }
            }
        }
    }
}

/// Object data shared by every closure on the same mesh.
#[derive(Debug, Clone)]
pub struct ClosureObject<'a> {
    pub mesh: &'a TriangleMesh,
    pub points: Vec<Vec3>,
    pub com: Vec3,
    pub radius: f64,
    grid: PointGrid,
}

impl<'a> ClosureObject<'a> {
    pub fn new(mesh: &'a TriangleMesh, spacing: f64) -> Self {
        let points = mesh.surface_points(spacing);
        let bounds = mesh.bounds();
        let com = mesh.centroid();
        let radius = points.iter().map(|p| (p - com).norm()).fold(0.0, f64::max);
        let grid = PointGrid::new(&points, &bounds, (4.0 * spacing).max(bounds.extent().max() / 64.0));
        Self { mesh, points, com, radius, grid }
    }
}

struct Evaluation {
    energy: f64,
    hessian: Mat10,
    gradient: Vec10,
    max_penetration: f64,
}

struct Simulator<'o, 'm> {
    kin: Kinematics,
    cfg: ClosureConfig,
    obj: &'o ClosureObject<'m>,
    stroke: f64,
    preload: f64,
    start: Pose,
}

#[derive(Debug, Clone, Copy)]
struct State {
    /// Object frame to TCP frame.
    pose: Pose,
    fingers: FingerState,
}

impl Simulator<'_, '_> {
    fn evaluate(&self, st: &State, command: f64, mut samples: Option<&mut Vec<ContactSample>>) -> Evaluation {
        let kc = self.cfg.contact_stiffness;
        let hand = self.kin.configuration_unchecked(&st.fingers);
        let inv = st.pose.inverse();
        let com = st.pose.transform_point(&self.obj.com);
        let mut ev =
            Evaluation { energy: 0.0, hessian: Mat10::zeros(), gradient: Vec10::zeros(), max_penetration: 0.0 };
        for shape in hand.shapes() {
            let query = shape.obb.transformed(&inv).aabb();
            let side = shape.link.side();
            self.obj.grid.for_each_in(&query, |i| {
                let x = st.pose.transform_point(&self.obj.points[i]);
                let (d, n) = shape.obb.signed_distance(&x);
                if d >= 0.0 {
                    return;
                }
                let mut j = Vec10::zeros();
                j.fixed_rows_mut::<3>(0).copy_from(&n);
                j.fixed_rows_mut::<3>(3).copy_from(&(x - com).cross(&n));
                if let Some(side) = side {
                    let (dp, dw) = self.kin.point_rates(shape.link, &st.fingers, &x);
                    j[6 + side.index()] = -n.dot(&dp);
                    j[8 + side.index()] = -n.dot(&dw);
                }
                ev.energy += 0.5 * kc * d * d;
                ev.gradient += j * (kc * d);
                ev.hessian.syger(kc, &j, &j, 1.0);
                ev.max_penetration = ev.max_penetration.max(-d);
                if let Some(out) = samples.as_deref_mut() {
                    out.push(ContactSample {
                        position: self.obj.points[i],
                        normal: inv.transform_vector(&n),
                        link: shape.link,
                        force: -kc * d,
                    });
                }
            });
        }
        let kt = self.cfg.tether_stiffness;
        let kr = self.cfg.tether_torsion;
        let drift = com - self.start.transform_point(&self.obj.com);
        let turn = rotation_vector(&(st.pose.rotation * self.start.rotation.transpose()));
        ev.energy += 0.5 * kt * drift.norm_squared() + 0.5 * kr * turn.norm_squared();
        for k in 0..3 {
            ev.gradient[k] += kt * drift[k];
            ev.gradient[3 + k] += kr * turn[k];
            ev.hessian[(k, k)] += kt;
            ev.hessian[(3 + k, 3 + k)] += kr;
        }
        let ka = self.cfg.actuator_stiffness;
        let lever = self.cfg.wrap_lever;
        for side in Side::BOTH {
            let (ip, iw) = (6 + side.index(), 8 + side.index());
            let p = st.fingers.closure[side.index()];
            let w = st.fingers.distal_wrap[side.index()];
            let e = command - self.stroke * p - lever * w;
            ev.energy += 0.5 * ka * e * e + self.preload * w + 0.5 * self.cfg.wrap_stiffness * w * w;
            ev.gradient[ip] -= ka * e * self.stroke;
            ev.gradient[iw] += -ka * e * lever + self.preload + self.cfg.wrap_stiffness * w;
            ev.hessian[(ip, ip)] += ka * self.stroke * self.stroke;
            ev.hessian[(iw, iw)] += ka * lever * lever + self.cfg.wrap_stiffness;
            ev.hessian[(ip, iw)] += ka * self.stroke * lever;
            ev.hessian[(iw, ip)] += ka * self.stroke * lever;
        }
        ev
    }

    fn actuator_force(&self, st: &State, command: f64) -> [f64; 2] {
        Side::BOTH.map(|s| {
            let i = s.index();
            self.cfg.actuator_stiffness
                * (command - self.stroke * st.fingers.closure[i] - self.cfg.wrap_lever * st.fingers.distal_wrap[i])
        })
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        match k {
            6 | 7 => (0.0, 1.0),
            8 | 9 => (0.0, self.kin.params.max_distal_wrap),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn coordinate(st: &State, k: usize) -> f64 {
        match k {
            6 | 7 => st.fingers.closure[k - 6],
            8 | 9 => st.fingers.distal_wrap[k - 8],
            _ => 0.0,
        }
    }

    fn apply(&self, st: &State, step: &Vec10) -> State {
        let v = Vec3::new(step[0], step[1], step[2]);
        let w = Vec3::new(step[3], step[4], step[5]);
        let angle = w.norm();
        let com = st.pose.transform_point(&self.obj.com);
        let rot = if angle > 0.0 { axis_angle(&(w / angle), angle) } else { Mat3::identity() };
        let mut next = *st;
        next.pose = Pose { rotation: rot * st.pose.rotation, translation: rot * (st.pose.translation - com) + com + v };
        for i in 0..2 {
            next.fingers.closure[i] = (st.fingers.closure[i] + step[6 + i]).clamp(0.0, 1.0);
            next.fingers.distal_wrap[i] =
                (st.fingers.distal_wrap[i] + step[8 + i]).clamp(0.0, self.kin.params.max_distal_wrap);
        }
        next
    }

    fn step_length(&self, step: &Vec10) -> f64 {
        let v = Vec3::new(step[0], step[1], step[2]).norm();
        let w = Vec3::new(step[3], step[4], step[5]).norm() * self.obj.radius.max(1e-3);
        let p = (step[6].abs().max(step[7].abs())) * self.stroke;
        let d = (step[8].abs().max(step[9].abs())) * self.kin.params.distal_length;
        v.max(w).max(p).max(d)
    }

    /// Bounded Levenberg-Marquardt; returns whether the iteration converged.
    fn settle(&self, st: &mut State, command: f64) -> bool {
        let mut cur = self.evaluate(st, command, None);
        let mut lambda = 1e-4;
        for _ in 0..self.cfg.max_settle_iterations {
            let mut free = [true; 10];
            for (k, f) in free.iter_mut().enumerate().skip(6) {
                let (lo, hi) = self.bounds(k);
                let x = Self::coordinate(st, k);
                if (x <= lo && cur.gradient[k] > 0.0) || (x >= hi && cur.gradient[k] < 0.0) {
                    *f = false;
                }
            }
            let max_diag = (0..10).map(|k| cur.hessian[(k, k)]).fold(0.0, f64::max);
            if max_diag == 0.0 {
                return true;
            }
            let mut accepted = None;
            for _ in 0..16 {
                let mut a = cur.hessian;
                let mut rhs = -cur.gradient;
                for k in 0..10 {
                    if free[k] {
                        a[(k, k)] += lambda * cur.hessian[(k, k)].max(1e-9 * max_diag) + 1e-15 * max_diag;
                    } else {
                        a.row_mut(k).fill(0.0);
                        a.column_mut(k).fill(0.0);
                        a[(k, k)] = 1.0;
                        rhs[k] = 0.0;
                    }
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 4.0;
                    continue;
                };
                let mut step = chol.solve(&rhs);
                let len = self.step_length(&step);
                if len > self.cfg.max_iteration_step {
                    step *= self.cfg.max_iteration_step / len;
                }
                let trial = self.apply(st, &step);
                let ev = self.evaluate(&trial, command, None);
                if ev.energy <= cur.energy {
                    let moved = self.step_length(&step);
                    accepted = Some((trial, ev, moved));
                    lambda = (lambda / 3.0).max(1e-9);
                    break;
                }
                lambda *= 4.0;
            }
            let Some((trial, ev, moved)) = accepted else {
                return false;
            };
            *st = trial;
            cur = ev;
            if moved < self.cfg.settle_tolerance {
                return true;
            }
        }
        false
    }
}

/// Groups penetrating samples into contact regions (same link, single
/// linkage at 5 mm). Each region is represented by the member closest to the
/// force-weighted centroid. Regions carrying less than `min_region_force`
/// are dropped. Output is sorted by link, then position.
pub fn extract_contacts(samples: &[ContactSample], min_region_force: f64) -> Vec<ContactPoint> {
    let points: Vec<ContactPoint> = samples
        .iter()
        .map(|s| ContactPoint {
            position: s.position,
            normal: s.normal,
            link: s.link,
            kind: ContactKind::for_link(s.link),
        })
        .collect();
    let (n, labels) = contact_regions(&points);
    let mut force = alloc::vec![0.0; n];
    let mut centroid = alloc::vec![Vec3::zeros(); n];
    for (s, &l) in samples.iter().zip(&labels) {
        force[l] += s.force;
        centroid[l] += s.position * s.force;
    }
    let mut best: Vec<Option<(f64, usize)>> = alloc::vec![None; n];
    for (i, &l) in labels.iter().enumerate() {
        let c = if force[l] > 0.0 { centroid[l] / force[l] } else { samples[i].position };
        let d = (samples[i].position - c).norm();
        if best[l].is_none_or(|(bd, _)| d < bd) {
            best[l] = Some((d, i));
        }
    }
    // Region labels already follow link, then position order.
    (0..n).filter(|&l| force[l] >= min_region_force).filter_map(|l| best[l].map(|(_, i)| points[i])).collect()
}

/// Closes the hand on `object` from `candidate` and returns the settled
/// grasp.
pub fn simulate_closure(
    gripper: &GripperParams,
    object: &ClosureObject<'_>,
    candidate: &GraspCandidate,
    cfg: &ClosureConfig,
) -> Result<SettledGrasp, ClosureFailure> {
    cfg.validate()?;
    let kin = gripper.kinematics()?;
    let stroke = gripper.max_aperture / 2.0;
    let sim = Simulator {
        kin,
        cfg: *cfg,
        obj: object,
        stroke,
        preload: cfg.wrap_preload * gripper.grasp_force * cfg.wrap_lever,
        start: candidate.pose.inverse(),
    };
    let mut st = State { pose: candidate.pose.inverse(), fingers: FingerState::open() };
    let start = sim.evaluate(&st, 0.0, None);
    if start.max_penetration > cfg.contact_tolerance || links_inside(&kin, &st, object.mesh) {
        return Err(ClosureFailure::InitialPenetration);
    }
    let com0 = st.pose.transform_point(&object.com);
    let step = cfg.step_fraction * stroke;
    let c_max = stroke + cfg.wrap_lever * gripper.max_distal_wrap + 2.0 * gripper.grasp_force / cfg.actuator_stiffness;
    let mut command = 0.0;
    let mut stalled = 0;
    loop {
        command = (command + step).min(c_max);
        if sim.settle(&mut st, command) {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                return Err(ClosureFailure::Ejected);
            }
        }
        if (st.pose.transform_point(&object.com) - com0).norm() > cfg.eject_distance {
            return Err(ClosureFailure::Ejected);
        }
        let force = sim.actuator_force(&st, command);
        if force.iter().all(|&f| f >= gripper.grasp_force) || command >= c_max {
            break;
        }
    }
    st.pose.rotation = reorthonormalize(&st.pose.rotation);
    let mut samples = Vec::new();
    sim.evaluate(&st, command, Some(&mut samples));
    let contacts = extract_contacts(&samples, cfg.min_region_force);
    if contacts.is_empty() {
        return Err(ClosureFailure::NoContact);
    }
    let mode = classify_grasp_mode(&contacts)?;
    let width = kin
        .fingertip_gap(&FingerState { closure: st.fingers.closure, distal_wrap: [0.0; 2] })
        .clamp(0.0, gripper.max_aperture);
    Ok(SettledGrasp {
        candidate_id: candidate.id,
        hand_pose: st.pose.inverse(),
        finger_state: st.fingers,
        contacts,
        mode,
        width,
    })
}

/// Whole-link containment, which the surface points cannot see.
fn links_inside(kin: &Kinematics, st: &State, mesh: &TriangleMesh) -> bool {
    if !mesh.is_watertight() {
        return false;
    }
    let inv = st.pose.inverse();
    kin.configuration_unchecked(&st.fingers)
        .shapes()
        .iter()
        .any(|s| mesh.distance(&inv.transform_point(&s.obb.pose.translation)).distance < 0.0)
}
