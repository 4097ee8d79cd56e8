//! Disturbance-rejection score: the largest force through the object's
//! center of mass that a contact set can balance, per direction.
//!
//! The primary path linearizes each friction cone into a pyramid, decides
//! static equilibrium with a phase-one simplex and bisects on the force
//! magnitude. [`force_ramp_oracle`] is an independent check that ramps the
//! load on exact circular cones with a projected-gradient solver.

mod ramp;
mod simplex;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hand::{ContactKind, ContactPoint, GripperParams, Link};
use crate::math::{cos, orthogonal_unit, sin, Vec3};

pub use ramp::{force_ramp_oracle, RampConfig};
pub use simplex::FeasibilityProblem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WrenchError {
    #[error("direction must be a unit vector")]
    NonUnitDirection,
    #[error("invalid force limits: {0}")]
    InvalidLimits(&'static str),
}

/// Fixed object-frame directions: +x, -x, +y, -y, +z, -z.
pub const DIRECTIONS: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];

pub fn direction(i: usize) -> Vec3 {
    Vec3::from(DIRECTIONS[i])
}

/// Maximum resisted force [N] along each of [`DIRECTIONS`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisturbanceRejectionScore {
    pub forces: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactForceLimits {
    /// Actuator force shared by the pad regions of one finger [N].
    pub squeeze_cap: f64,
    /// Normal force limit of a proximal or palm contact [N].
    pub constraint_cap: f64,
    pub mu: f64,
    pub cone_edges: usize,
}

impl Default for ContactForceLimits {
    fn default() -> Self {
        Self::from_gripper(&GripperParams::default())
    }
}

impl ContactForceLimits {
    pub fn from_gripper(g: &GripperParams) -> Self {
        Self { squeeze_cap: g.grasp_force, constraint_cap: g.structural_force_cap, mu: g.mu_static, cone_edges: 8 }
    }

    pub fn validate(&self) -> Result<(), WrenchError> {
        if !(self.squeeze_cap > 0.0 && self.constraint_cap > 0.0) {
            return Err(WrenchError::InvalidLimits("caps must be positive"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(WrenchError::InvalidLimits("mu must be finite and non-negative"));
        }
        if self.cone_edges < 4 {
            return Err(WrenchError::InvalidLimits("cone_edges must be at least 4"));
        }
        Ok(())
    }
}

/// Bisection range and resolution [N].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub f_max: f64,
    pub resolution: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { f_max: 500.0, resolution: 0.1 }
    }
}

/// Normal force cap per contact. Squeeze caps split the actuator force
/// evenly across the pad regions of the same finger.
pub fn contact_caps(contacts: &[ContactPoint], limits: &ContactForceLimits) -> Vec<f64> {
    let pads = |link: Link| contacts.iter().filter(|c| c.link == link && c.kind == ContactKind::Squeeze).count();
    contacts
        .iter()
        .map(|c| match c.kind {
            ContactKind::Squeeze => limits.squeeze_cap / pads(c.link).max(1) as f64,
            ContactKind::Constraint => limits.constraint_cap,
        })
        .collect()
}

/// Contact tangent basis: `t1` from the least-aligned axis, `t2 = n × t1`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let t1 = orthogonal_unit(n);
    (t1, n.cross(&t1))
}

/// Torque rows are divided by this length so they share the force units.
pub(crate) fn torque_scale(contacts: &[ContactPoint], com: &Vec3) -> f64 {
    contacts.iter().map(|c| (c.position - com).norm()).fold(0.0, f64::max).max(1e-6)
}

fn pyramid_problem(
    contacts: &[ContactPoint],
    com: &Vec3,
    external: &Vec3,
    limits: &ContactForceLimits,
) -> FeasibilityProblem {
    let m = limits.cone_edges;
    let n_vars = contacts.len() * m;
    let scale = torque_scale(contacts, com);
    let caps = contact_caps(contacts, limits);
    let mut eq = alloc::vec![0.0; 6 * n_vars];
    let mut ineq = alloc::vec![0.0; contacts.len() * n_vars];
    for (j, c) in contacts.iter().enumerate() {
        let (t1, t2) = tangent_basis(&c.normal);
        let arm = c.position - com;
        for k in 0..m {
            let phi = core::f64::consts::TAU * k as f64 / m as f64;
            let e = c.normal + (t1 * cos(phi) + t2 * sin(phi)) * limits.mu;
            let tau = arm.cross(&e) / scale;
            let col = j * m + k;
            for r in 0..3 {
                eq[r * n_vars + col] = e[r];
                eq[(3 + r) * n_vars + col] = tau[r];
            }
            // The normal component of every edge is 1.
            ineq[j * n_vars + col] = 1.0;
        }
    }
    FeasibilityProblem {
        n_vars,
        eq,
        eq_rhs: alloc::vec![-external.x, -external.y, -external.z, 0.0, 0.0, 0.0],
        ineq,
        ineq_rhs: caps,
    }
}

/// True when contact forces inside their pyramids and under their caps
/// balance `external_force` applied at `com` with zero net torque.
pub fn equilibrium_feasible(
    contacts: &[ContactPoint],
    com: &Vec3,
    external_force: &Vec3,
    limits: &ContactForceLimits,
) -> bool {
    if external_force.iter().all(|&v| v == 0.0) {
        return true;
    }
    if contacts.is_empty() {
        return false;
    }
    pyramid_problem(contacts, com, external_force, limits).is_feasible()
}

fn check_direction(direction: &Vec3) -> Result<(), WrenchError> {
    if (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(WrenchError::NonUnitDirection);
    }
    Ok(())
}

/// Largest force along `direction` that keeps equilibrium feasible, by
/// bisection on `[0, f_max]` down to `resolution`.
pub fn max_resisted_force(
    contacts: &[ContactPoint],
    com: &Vec3,
    direction: &Vec3,
    limits: &ContactForceLimits,
    search: &SearchConfig,
) -> Result<f64, WrenchError> {
    check_direction(direction)?;
    limits.validate()?;
    if contacts.is_empty() {
        return Ok(0.0);
    }
    let feasible = |f: f64| equilibrium_feasible(contacts, com, &(direction * f), limits);
    if feasible(search.f_max) {
        return Ok(search.f_max);
    }
    let (mut lo, mut hi) = (0.0, search.f_max);
    while hi - lo > search.resolution {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// [`max_resisted_force`] along every fixed direction.
pub fn disturbance_rejection_score(
    contacts: &[ContactPoint],
    com: &Vec3,
    limits: &ContactForceLimits,
    search: &SearchConfig,
) -> Result<DisturbanceRejectionScore, WrenchError> {
    let mut forces = [0.0; 6];
    for (i, f) in forces.iter_mut().enumerate() {
        *f = max_resisted_force(contacts, com, &direction(i), limits, search)?;
    }
    Ok(DisturbanceRejectionScore { forces })
}
