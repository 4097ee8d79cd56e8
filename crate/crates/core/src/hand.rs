//! Planar surrogate of a 2F-85-like underactuated two-finger gripper.
//!
//! TCP frame: `z` is the approach direction, `y` the closing axis and
//! `x = y × z`. The left finger sits on `+y`, the right finger on `-y`. The
//! TCP lies midway between the fingertip pads of the open hand.
//!
//! Each finger has an actuated proximal link rotating about a joint on the
//! palm face and a passive distal link hinged at the knuckle. The distal angle
//! `w` is measured against the palm (`w = 0` keeps the pad parallel to the
//! closing plane) and grows as the pad curls inward.
//!
//! Link dimensions of the real gripper are not public; every default below
//! is an approximation that reproduces the 85 mm stroke and the pinch versus
//! envelope behavior.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Obb, Pose};
use crate::math::{asin, cos, sin, Mat3, Vec3};

/// Shrink applied to the proxy boxes to obtain the detailed link geometry.
pub const DETAIL_MARGIN: f64 = 5e-4;
/// Contacts closer than this on one link form a single region.
pub const REGION_RADIUS: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HandError {
    #[error("invalid gripper parameter: {0}")]
    InvalidParams(&'static str),
    #[error("finger state out of limits")]
    StateOutOfLimits,
    #[error("empty contact set")]
    EmptyContacts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperParams {
    pub max_aperture: f64,
    pub proximal_length: f64,
    pub distal_length: f64,
    pub palm_width: f64,
    pub palm_depth: f64,
    pub palm_thickness: f64,
    pub finger_thickness: f64,
    pub finger_width: f64,
    /// Upper limit of the passive distal angle [rad].
    pub max_distal_wrap: f64,
    pub grasp_force: f64,
    pub mu_static: f64,
    pub mu_dynamic: f64,
    pub structural_force_cap: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        Self {
            max_aperture: 0.085,
            proximal_length: 0.057,
            distal_length: 0.040,
            palm_width: 0.085,
            palm_depth: 0.05,
            palm_thickness: 0.06,
            finger_thickness: 0.012,
            finger_width: 0.022,
            max_distal_wrap: 1.0,
            grasp_force: 40.0,
            mu_static: 0.75,
            mu_dynamic: 0.5,
            structural_force_cap: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// `+1` for the left finger, `-1` for the right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Link {
    FingertipL,
    FingertipR,
    ProximalL,
    ProximalR,
    Palm,
}

impl Link {
    pub const ALL: [Link; 5] = [Link::Palm, Link::ProximalL, Link::ProximalR, Link::FingertipL, Link::FingertipR];

    pub fn is_fingertip(self) -> bool {
        matches!(self, Link::FingertipL | Link::FingertipR)
    }

    pub fn side(self) -> Option<Side> {
        match self {
            Link::FingertipL | Link::ProximalL => Some(Side::Left),
            Link::FingertipR | Link::ProximalR => Some(Side::Right),
            Link::Palm => None,
        }
    }

    pub fn proximal(side: Side) -> Link {
        match side {
            Side::Left => Link::ProximalL,
            Side::Right => Link::ProximalR,
        }
    }

    pub fn fingertip(side: Side) -> Link {
        match side {
            Side::Left => Link::FingertipL,
            Side::Right => Link::FingertipR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContactKind {
    /// Actuation-limited push from a fingertip pad.
    Squeeze,
    /// Object pressed into a proximal link or the palm.
    Constraint,
}

impl ContactKind {
    pub fn for_link(link: Link) -> Self {
        if link.is_fingertip() {
            ContactKind::Squeeze
        } else {
            ContactKind::Constraint
        }
    }
}

/// A contact between the hand and the object, expressed in the object frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: Vec3,
    /// Unit direction in which the link pushes the object.
    pub normal: Vec3,
    pub link: Link,
    pub kind: ContactKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraspMode {
    Precision,
    Power,
}

/// Per-finger closure in `[0, 1]` and passive distal angle [rad].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FingerState {
    pub closure: [f64; 2],
    pub distal_wrap: [f64; 2],
}

impl FingerState {
    pub fn open() -> Self {
        Self::default()
    }

    pub fn symmetric(closure: f64, distal_wrap: f64) -> Self {
        Self { closure: [closure; 2], distal_wrap: [distal_wrap; 2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkShape {
    pub link: Link,
    pub obb: Obb,
}

/// Link boxes in the TCP frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandConfiguration {
    pub palm: Obb,
    pub proximal: [Obb; 2],
    pub distal: [Obb; 2],
    /// Joint origins on the palm face.
    pub joints: [Vec3; 2],
    pub knuckles: [Vec3; 2],
}

impl HandConfiguration {
    pub fn shapes(&self) -> [LinkShape; 5] {
        [
            LinkShape { link: Link::Palm, obb: self.palm },
            LinkShape { link: Link::ProximalL, obb: self.proximal[0] },
            LinkShape { link: Link::ProximalR, obb: self.proximal[1] },
            LinkShape { link: Link::FingertipL, obb: self.distal[0] },
            LinkShape { link: Link::FingertipR, obb: self.distal[1] },
        ]
    }

    pub fn shape(&self, link: Link) -> Obb {
        match link {
            Link::Palm => self.palm,
            Link::ProximalL => self.proximal[0],
            Link::ProximalR => self.proximal[1],
            Link::FingertipL => self.distal[0],
            Link::FingertipR => self.distal[1],
        }
    }
}

/// Derived mechanism constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub params: GripperParams,
    /// Lateral offset of each proximal joint from the TCP axis.
    pub joint_offset: f64,
    /// Height of the palm face along the approach axis.
    pub palm_face: f64,
    pub theta_open: f64,
    pub theta_closed: f64,
}

impl GripperParams {
    pub fn validate(&self) -> Result<(), HandError> {
        let lengths = [
            self.max_aperture,
            self.proximal_length,
            self.distal_length,
            self.palm_width,
            self.palm_depth,
            self.palm_thickness,
            self.finger_thickness,
            self.finger_width,
        ];
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(HandError::InvalidParams("lengths must be positive"));
        }
        if !(self.mu_dynamic > 0.0 && self.mu_dynamic <= self.mu_static && self.mu_static.is_finite()) {
            return Err(HandError::InvalidParams("need 0 < mu_dynamic <= mu_static"));
        }
        if !(self.grasp_force > 0.0 && self.grasp_force.is_finite()) {
            return Err(HandError::InvalidParams("grasp_force must be positive"));
        }
        if !(self.structural_force_cap >= self.grasp_force && self.structural_force_cap.is_finite()) {
            return Err(HandError::InvalidParams("structural_force_cap must be at least grasp_force"));
        }
        if !(self.max_distal_wrap >= 0.0 && self.max_distal_wrap < core::f64::consts::FRAC_PI_2) {
            return Err(HandError::InvalidParams("max_distal_wrap must lie in [0, pi/2)"));
        }
        if self.finger_thickness >= self.palm_width {
            return Err(HandError::InvalidParams("fingers thicker than the palm"));
        }
        let k = self.kinematics_unchecked();
        if !(k.theta_open.is_finite() && k.theta_closed.is_finite()) {
            return Err(HandError::InvalidParams("aperture not reachable with these link lengths"));
        }
        Ok(())
    }

    pub fn kinematics(&self) -> Result<Kinematics, HandError> {
        self.validate()?;
        Ok(self.kinematics_unchecked())
    }

    fn kinematics_unchecked(&self) -> Kinematics {
        let t = self.finger_thickness;
        let b = self.palm_width / 2.0 - t / 2.0;
        let lp = self.proximal_length;
        let s_open = (self.max_aperture / 2.0 + t / 2.0 - b) / lp;
        let s_closed = (t / 2.0 - b) / lp;
        let valid = |s: f64| (-1.0..=1.0).contains(&s);
        let theta_open = if valid(s_open) { asin(s_open) } else { f64::NAN };
        let theta_closed = if valid(s_closed) { asin(s_closed) } else { f64::NAN };
        Kinematics {
            params: *self,
            joint_offset: b,
            palm_face: -self.distal_length / 2.0 - lp * cos(theta_open),
            theta_open,
            theta_closed,
        }
    }
}

fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = (sin(angle), cos(angle));
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

impl Kinematics {
    pub fn check_state(&self, state: &FingerState) -> Result<(), HandError> {
        let ok = state.closure.iter().all(|p| (0.0..=1.0).contains(p))
            && state.distal_wrap.iter().all(|w| (0.0..=self.params.max_distal_wrap).contains(w));
        if ok {
            Ok(())
        } else {
            Err(HandError::StateOutOfLimits)
        }
    }

    /// Proximal angle from the approach axis, positive outward.
    pub fn proximal_angle(&self, closure: f64) -> f64 {
        self.theta_open + closure * (self.theta_closed - self.theta_open)
    }

    /// d(theta)/d(closure).
    pub fn angle_rate(&self) -> f64 {
        self.theta_closed - self.theta_open
    }

    pub fn joint(&self, side: Side) -> Vec3 {
        Vec3::new(0.0, side.sign() * self.joint_offset, self.palm_face)
    }

    pub fn knuckle(&self, side: Side, closure: f64) -> Vec3 {
        let s = side.sign();
        let th = self.proximal_angle(closure);
        self.joint(side) + self.params.proximal_length * Vec3::new(0.0, s * sin(th), cos(th))
    }

    /// Link boxes for a state inside the limits.
    pub fn configuration(&self, state: &FingerState) -> Result<HandConfiguration, HandError> {
        self.check_state(state)?;
        Ok(self.configuration_unchecked(state))
    }

    pub(crate) fn configuration_unchecked(&self, state: &FingerState) -> HandConfiguration {
        let p = &self.params;
        let t = p.finger_thickness;
        let palm = Obb::new(
            Pose::from_translation(Vec3::new(0.0, 0.0, self.palm_face - p.palm_thickness / 2.0)),
            Vec3::new(p.palm_depth / 2.0, p.palm_width / 2.0, p.palm_thickness / 2.0),
        );
        let mut proximal = [palm; 2];
        let mut distal = [palm; 2];
        let mut joints = [Vec3::zeros(); 2];
        let mut knuckles = [Vec3::zeros(); 2];
        for side in Side::BOTH {
            let i = side.index();
            let s = side.sign();
            let th = self.proximal_angle(state.closure[i]);
            let j = self.joint(side);
            let k = self.knuckle(side, state.closure[i]);
            // rot_x(phi) maps +z to (0, -sin phi, cos phi).
            let r_prox = rot_x(-s * th);
            proximal[i] = Obb::new(
                Pose { rotation: r_prox, translation: (j + k) / 2.0 },
                Vec3::new(p.finger_width / 2.0, t / 2.0, p.proximal_length / 2.0),
            );
            let w = state.distal_wrap[i];
            let r_dist = rot_x(s * w);
            let v = r_dist.column(2).into_owned();
            distal[i] = Obb::new(
                Pose { rotation: r_dist, translation: k + v * (p.distal_length / 2.0) },
                Vec3::new(p.finger_width / 2.0, t / 2.0, p.distal_length / 2.0),
            );
            joints[i] = j;
            knuckles[i] = k;
        }
        HandConfiguration { palm, proximal, distal, joints, knuckles }
    }

    /// Gap between the inner pad faces at the fingertips.
    pub fn fingertip_gap(&self, state: &FingerState) -> f64 {
        let p = &self.params;
        let mut inner = [0.0; 2];
        for side in Side::BOTH {
            let i = side.index();
            let th = self.proximal_angle(state.closure[i]);
            let w = state.distal_wrap[i];
            inner[i] = self.joint_offset + p.proximal_length * sin(th)
                - p.distal_length * sin(w)
                - p.finger_thickness / 2.0 * cos(w);
        }
        inner[0] + inner[1]
    }

    /// Pad gap with the distal links held parallel; the grasp width reported
    /// for a closure value.
    pub fn width_at(&self, closure: f64) -> f64 {
        let p = &self.params;
        (2.0 * (self.joint_offset + p.proximal_length * sin(self.proximal_angle(closure))) - p.finger_thickness)
            .clamp(0.0, p.max_aperture)
    }

    /// Closure value at which the parallel pads are `width` apart.
    pub fn closure_for_width(&self, width: f64) -> f64 {
        let p = &self.params;
        let s = ((width + p.finger_thickness) / 2.0 - self.joint_offset) / p.proximal_length;
        let th = asin(s.clamp(-1.0, 1.0));
        ((th - self.theta_open) / self.angle_rate()).clamp(0.0, 1.0)
    }

    /// Velocity of a point rigidly attached to `link` per unit change of the
    /// finger's closure and of its distal angle.
    pub fn point_rates(&self, link: Link, state: &FingerState, x: &Vec3) -> (Vec3, Vec3) {
        let Some(side) = link.side() else {
            return (Vec3::zeros(), Vec3::zeros());
        };
        let i = side.index();
        let s = side.sign();
        let xh = Vec3::x();
        let j = self.joint(side);
        let rate = self.angle_rate();
        if link.is_fingertip() {
            // The distal link keeps its orientation when the proximal link turns.
            let k = self.knuckle(side, state.closure[i]);
            let d_closure = -s * xh.cross(&(k - j)) * rate;
            let d_wrap = s * xh.cross(&(x - k));
            (d_closure, d_wrap)
        } else {
            (-s * xh.cross(&(x - j)) * rate, Vec3::zeros())
        }
    }
}

/// Collision proxies of the hand in the TCP frame.
pub fn hand_collision_shapes(params: &GripperParams, state: &FingerState) -> Result<[LinkShape; 5], HandError> {
    Ok(params.kinematics()?.configuration(state)?.shapes())
}

/// Link poses (palm, proximal L/R, distal L/R) in the TCP frame.
pub fn finger_configuration(params: &GripperParams, state: &FingerState) -> Result<HandConfiguration, HandError> {
    params.kinematics()?.configuration(state)
}

/// Detailed link geometry: the proxies shrunk by `DETAIL_MARGIN`.
pub fn detailed_link_geometry(config: &HandConfiguration) -> [LinkShape; 5] {
    config.shapes().map(|s| LinkShape { link: s.link, obb: s.obb.inflated(-DETAIL_MARGIN) })
}

/// Groups contacts into regions: connected components of the "same link and
/// closer than `REGION_RADIUS`" relation. Returns a region id per contact,
/// numbered by first appearance in link order then position order, so the
/// grouping does not depend on the input order.
pub fn contact_regions(contacts: &[ContactPoint]) -> (usize, Vec<usize>) {
    let n = contacts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if contacts[a].link == contacts[b].link
                && (contacts[a].position - contacts[b].position).norm() < REGION_RADIUS
            {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&contacts[a], &contacts[b]);
        ca.link.cmp(&cb.link).then_with(|| {
            ca.position
                .iter()
                .zip(cb.position.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(core::cmp::Ordering::Equal)
        })
    });
    let mut label = alloc::vec![usize::MAX; n];
    let mut root_label = alloc::vec![usize::MAX; n];
    let mut next = 0;
    for &i in &order {
        let r = find(&mut parent, i);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        label[i] = root_label[r];
    }
    (next, label)
}

/// Power iff some contact lies on a proximal link or the palm and there are
/// at least three distinct contact regions.
pub fn classify_grasp_mode(contacts: &[ContactPoint]) -> Result<GraspMode, HandError> {
    if contacts.is_empty() {
        return Err(HandError::EmptyContacts);
    }
    let inner = contacts.iter().any(|c| !c.link.is_fingertip());
    let (regions, _) = contact_regions(contacts);
    Ok(if inner && regions >= 3 { GraspMode::Power } else { GraspMode::Precision })
}
