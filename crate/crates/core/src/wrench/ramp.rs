//! Force-ramp cross-check on exact circular friction cones.
//!
//! The load grows by `step` per stage. Each stage solves
//!
//! ```text
//! min ‖A f + w‖²   s.t.  0 <= f_n <= cap,  |f_t| <= mu f_n
//! ```
//!
//! with accelerated projected gradient, warm-started from the previous stage.
//! The unbalanced remainder `‖A f + w‖` is treated as the spring force of a
//! soft holding fixture (`hold_stiffness`): the object drifts by
//! `residual / hold_stiffness` per stage and escapes once the accumulated
//! drift passes `escape_distance`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_direction, contact_caps, tangent_basis, torque_scale, ContactForceLimits, WrenchError};
use crate::hand::ContactPoint;
use crate::math::{sqrt, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    /// Load increment per stage [N].
    pub step: f64,
    /// Largest load tried [N].
    pub f_max: f64,
    /// Residuals below this count as balanced [N].
    pub residual_tolerance: f64,
    pub hold_stiffness: f64,
    pub escape_distance: f64,
    pub max_iterations: usize,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            f_max: 500.0,
            residual_tolerance: 1e-4,
            hold_stiffness: 10.0,
            escape_distance: 0.02,
            max_iterations: 4000,
        }
    }
}

/// Projection of `(a, r)`, `r >= 0`, onto `{0 <= a <= cap, r <= mu a}`.
fn project_cone_2d(a: f64, r: f64, cap: f64, mu: f64) -> (f64, f64) {
    if a >= 0.0 && a <= cap && r <= mu * a {
        return (a, r);
    }
    let segment = |p: (f64, f64), q: (f64, f64)| {
        let d = (q.0 - p.0, q.1 - p.1);
        let len2 = d.0 * d.0 + d.1 * d.1;
        let t = if len2 > 0.0 { (((a - p.0) * d.0 + (r - p.1) * d.1) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let x = (p.0 + t * d.0, p.1 + t * d.1);
        ((x.0 - a) * (x.0 - a) + (x.1 - r) * (x.1 - r), x)
    };
    let corners = [(0.0, 0.0), (cap, 0.0), (cap, mu * cap)];
    let mut best = segment(corners[0], corners[1]);
    for (p, q) in [(corners[1], corners[2]), (corners[2], corners[0])] {
        let cand = segment(p, q);
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best.1
}

struct Qp {
    /// Row-major 6 x 3m map from local contact forces to the scaled net wrench.
    a: Vec<f64>,
    n: usize,
    caps: Vec<f64>,
    mu: f64,
    lipschitz: f64,
}

impl Qp {
    fn new(contacts: &[ContactPoint], com: &Vec3, limits: &ContactForceLimits) -> Self {
        let n = 3 * contacts.len();
        let scale = torque_scale(contacts, com);
        let mut a = alloc::vec![0.0; 6 * n];
        for (j, c) in contacts.iter().enumerate() {
            let (t1, t2) = tangent_basis(&c.normal);
            let arm = c.position - com;
            for (k, axis) in [c.normal, t1, t2].iter().enumerate() {
                let tau = arm.cross(axis) / scale;
                for r in 0..3 {
                    a[r * n + 3 * j + k] = axis[r];
                    a[(3 + r) * n + 3 * j + k] = tau[r];
                }
            }
        }
        // Largest eigenvalue of A Aᵀ (6 x 6) by power iteration.
        let mut aat = [[0.0; 6]; 6];
        for (r, row) in aat.iter_mut().enumerate() {
            for (s, v) in row.iter_mut().enumerate() {
                *v = (0..n).map(|k| a[r * n + k] * a[s * n + k]).sum();
            }
        }
        let mut v = [1.0; 6];
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut w = [0.0; 6];
            for r in 0..6 {
                w[r] = (0..6).map(|s| aat[r][s] * v[s]).sum();
            }
            let norm = sqrt(w.iter().map(|x| x * x).sum());
            if norm == 0.0 {
                break;
            }
            lambda = norm / sqrt(v.iter().map(|x| x * x).sum());
            v = w.map(|x| x / norm);
        }
        Self { a, n, caps: contact_caps(contacts, limits), mu: limits.mu, lipschitz: (lambda * 1.05).max(1e-12) }
    }

    fn residual(&self, f: &[f64], w: &[f64; 6]) -> [f64; 6] {
        let mut r = *w;
        for (row, ri) in r.iter_mut().enumerate() {
            *ri += (0..self.n).map(|k| self.a[row * self.n + k] * f[k]).sum::<f64>();
        }
        r
    }

    fn project(&self, f: &mut [f64]) {
        for (j, cap) in self.caps.iter().enumerate() {
            let (a, b, c) = (f[3 * j], f[3 * j + 1], f[3 * j + 2]);
            let r = sqrt(b * b + c * c);
            let (pa, pr) = project_cone_2d(a, r, *cap, self.mu);
            f[3 * j] = pa;
            if r > 0.0 {
                f[3 * j + 1] = b * pr / r;
                f[3 * j + 2] = c * pr / r;
            }
        }
    }

    /// FISTA with function-value restarts; returns the residual norm.
    fn solve(&self, f: &mut Vec<f64>, w: &[f64; 6], max_iter: usize, target: f64) -> f64 {
        let objective = |x: &[f64]| self.residual(x, w).iter().map(|v| v * v).sum::<f64>();
        let mut x = f.clone();
        self.project(&mut x);
        let mut y = x.clone();
        let mut t = 1.0;
        let mut fx = objective(&x);
        for _ in 0..max_iter {
            if sqrt(fx) <= target {
                break;
            }
            let r = self.residual(&y, w);
            let mut next: Vec<f64> = (0..self.n)
                .map(|k| y[k] - (0..6).map(|row| self.a[row * self.n + k] * r[row]).sum::<f64>() / self.lipschitz)
                .collect();
            self.project(&mut next);
            let fn_ = objective(&next);
            if fn_ > fx {
                // Restart the momentum.
                t = 1.0;
                y.clone_from(&x);
                continue;
            }
            let t_next = (1.0 + sqrt(1.0 + 4.0 * t * t)) / 2.0;
            let beta = (t - 1.0) / t_next;
            let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            for k in 0..self.n {
                y[k] = next[k] + beta * (next[k] - x[k]);
            }
            x = next;
            fx = fn_;
            t = t_next;
            if moved == 0.0 {
                break;
            }
        }
        *f = x;
        sqrt(fx)
    }
}

/// Largest stage load resisted before the object escapes.
pub fn force_ramp_oracle(
    contacts: &[ContactPoint],
    com: &Vec3,
    direction: &Vec3,
    limits: &ContactForceLimits,
    cfg: &RampConfig,
) -> Result<f64, WrenchError> {
    check_direction(direction)?;
    limits.validate()?;
    if contacts.is_empty() {
        return Ok(0.0);
    }
    let qp = Qp::new(contacts, com, limits);
    let mut f = alloc::vec![0.0; qp.n];
    let mut drift = 0.0;
    let mut resisted = 0.0;
    let mut stage = 1u64;
    loop {
        let load = (stage as f64 * cfg.step).min(cfg.f_max);
        let ext = direction * load;
        let w = [ext.x, ext.y, ext.z, 0.0, 0.0, 0.0];
        let residual = qp.solve(&mut f, &w, cfg.max_iterations, cfg.residual_tolerance * 0.1);
        if residual <= cfg.residual_tolerance {
            resisted = load;
        } else {
            drift += residual / cfg.hold_stiffness;
            if drift > cfg.escape_distance {
                break;
            }
        }
        if load >= cfg.f_max {
            break;
        }
        stage += 1;
    }
    Ok(resisted)
}
