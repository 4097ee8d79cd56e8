//! Sampling, closure and scoring through the public API on one object.

use gravgrasp_core::closure::{simulate_closure, ClosureConfig, ClosureObject, SettledGrasp};
use gravgrasp_core::geometry::primitives::cylinder;
use gravgrasp_core::hand::GripperParams;
use gravgrasp_core::math::Vec3;
use gravgrasp_core::sampling::{expand_with_perturbations, sample_antipodal_grasps, SamplerConfig};
use gravgrasp_core::scene::{gravity_rejection, GravityProjectionParams};
use gravgrasp_core::wrench::{
    direction, disturbance_rejection_score, force_ramp_oracle, ContactForceLimits, DisturbanceRejectionScore,
    RampConfig, SearchConfig,
};

fn settle(n: usize) -> (Vec<(SettledGrasp, DisturbanceRejectionScore)>, Vec3) {
    let mesh = cylinder(0.0325, 0.2, 24);
    let gripper = GripperParams::default();
    let cfg = SamplerConfig { n_surface_samples: 6, perturbations_per_seed: 1, rng_seed: 5, ..Default::default() };
    let seeds = sample_antipodal_grasps(&mesh, &cfg, &gripper).unwrap();
    let candidates = expand_with_perturbations(&seeds, &cfg);
    assert!(candidates.len() >= seeds.len());
    let object = ClosureObject::new(&mesh, 0.0025);
    let limits = ContactForceLimits::from_gripper(&gripper);
    let settled = candidates
        .iter()
        .take(n)
        .filter_map(|c| simulate_closure(&gripper, &object, c, &ClosureConfig::default()).ok())
        .map(|g| {
            let s = disturbance_rejection_score(&g.contacts, &object.com, &limits, &SearchConfig::default()).unwrap();
            (g, s)
        })
        .collect();
    (settled, object.com)
}

#[test]
fn cylinder_grasps_settle_and_score_reproducibly() {
    let (a, com) = settle(12);
    assert!(!a.is_empty());
    let (b, _) = settle(12);
    assert_eq!(a, b);

    let limits = ContactForceLimits::default();
    let params = GravityProjectionParams::default();
    for (g, score) in &a {
        assert!(!g.contacts.is_empty());
        assert!(score.forces.iter().all(|f| (0.0..=SearchConfig::default().f_max).contains(f)));
        let down = gravity_rejection(score, &-Vec3::z(), &params).unwrap();
        assert!(down <= score.forces.iter().cloned().fold(0.0, f64::max) + 1e-9);
        // Tangential pulls along the cylinder axis are friction-limited, so
        // the exact-cone ramp may exceed the pyramid but not fall far below.
        let lp = score.forces[4];
        let ramp = force_ramp_oracle(&g.contacts, &com, &direction(4), &limits, &RampConfig::default()).unwrap();
        assert!(ramp >= lp * 0.8 - 1.0, "ramp {ramp} lp {lp}");
    }
}
