//! Collision predicates between meshes, oriented boxes and the table plane.

use alloc::vec::Vec;

use super::aabb::Aabb;
use super::triangle;
use super::{Pose, TriangleMesh};
use crate::math::Vec3;

/// Oriented box: `pose` maps box-local coordinates (centered) to the parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub pose: Pose,
    pub half_extents: Vec3,
}

impl Obb {
    pub fn new(pose: Pose, half_extents: Vec3) -> Self {
        Self { pose, half_extents }
    }

    /// Same box expressed in another frame: `frame` maps this box's parent to the new parent.
    pub fn transformed(&self, frame: &Pose) -> Obb {
        Obb { pose: frame.compose(&self.pose), half_extents: self.half_extents }
    }

    pub fn inflated(&self, margin: f64) -> Obb {
        Obb { pose: self.pose, half_extents: self.half_extents.add_scalar(margin) }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half_extents;
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let local = Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            *c = self.pose.transform_point(&local);
        }
        out
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.corners().iter())
    }

    /// Signed distance from a parent-frame point to the box surface and the
    /// outward normal (parent frame) of the nearest face.
    pub fn signed_distance(&self, p: &Vec3) -> (f64, Vec3) {
        let local = self.pose.inverse_transform_point(p);
        let (d, n) = box_sdf(&local, &self.half_extents);
        (d, self.pose.transform_vector(&n))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.pose.inverse_transform_point(p);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    /// Triangle mesh of the box surface.
    pub fn to_mesh(&self) -> TriangleMesh {
        super::primitives::box_mesh(self.half_extents).transformed(&self.pose)
    }
}

/// Box SDF in local coordinates; the normal belongs to the face that
/// determines the distance (nearest face when inside).
pub fn box_sdf(p: &Vec3, half: &Vec3) -> (f64, Vec3) {
    let q = p.abs() - half;
    let outside = q.sup(&Vec3::zeros());
    let out_norm = outside.norm();
    if out_norm > 0.0 {
        let mut n = Vec3::zeros();
        for i in 0..3 {
            if q[i] > 0.0 {
                n[i] = q[i] * p[i].signum();
            }
        }
        return (out_norm, n / out_norm);
    }
    let axis = if q.x >= q.y && q.x >= q.z {
        0
    } else if q.y >= q.z {
        1
    } else {
        2
    };
    let mut n = Vec3::zeros();
    n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
    (q[axis], n)
}

/// True when the box (inflated by `clearance`) overlaps the mesh surface or
/// volume. `obb` is expressed in the mesh frame.
pub fn obb_intersects_mesh(obb: &Obb, mesh: &TriangleMesh, clearance: f64) -> bool {
    let obb = obb.inflated(clearance.max(0.0));
    let query = obb.aabb();
    if !query.overlaps(&mesh.bounds()) {
        return false;
    }
    let inv = obb.pose.inverse();
    let hit = mesh.for_each_triangle_in(&query, |ti| {
        let tri = mesh.triangle(ti).map(|v| inv.transform_point(&v));
        triangle::triangle_overlaps_box(&tri, &obb.half_extents)
    });
    if hit {
        return true;
    }
    // No surface crossing: either disjoint or one contains the other.
    if mesh.is_watertight() && mesh.distance(&obb.pose.translation).distance < 0.0 {
        return true;
    }
    obb.contains(&mesh.vertices()[0])
}

/// True when the box comes within `clearance` of the half-space `z <= height`
/// (world frame).
pub fn obb_below_plane(obb: &Obb, height: f64, clearance: f64) -> bool {
    obb.corners().iter().any(|c| c.z < height + clearance)
}

/// Minimum distance between two posed meshes, or `None` when they overlap
/// (surfaces touch or cross, or one encloses the other). Stops early once
/// any pair is closer than `stop_below`.
pub fn mesh_distance(a: &TriangleMesh, pose_a: &Pose, b: &TriangleMesh, pose_b: &Pose, stop_below: f64) -> Option<f64> {
    // Canonical argument order keeps the predicate exactly symmetric.
    let (big, pose_big, small, pose_small) =
        if canonical_first(a, pose_a, b, pose_b) { (a, pose_a, b, pose_b) } else { (b, pose_b, a, pose_a) };
    let small_in_big = pose_big.inverse().compose(pose_small);
    let big_in_small = small_in_big.inverse();

    if big.is_watertight() {
        let p = small_in_big.transform_point(&small.vertices()[0]);
        if big.distance(&p).distance <= 0.0 {
            return None;
        }
    }
    if small.is_watertight() {
        let p = big_in_small.transform_point(&big.vertices()[0]);
        if small.distance(&p).distance <= 0.0 {
            return None;
        }
    }

    let tris: Vec<[Vec3; 3]> =
        (0..small.triangles().len()).map(|t| small.triangle(t).map(|v| small_in_big.transform_point(&v))).collect();
    let mut best = f64::INFINITY;
    for tri in &tris {
        let bounds = Aabb::from_points(tri.iter());
        // Only triangles of `big` within the current best distance can improve it.
        let reach = if best.is_finite() { best } else { big.bounds().extent().norm() + bounds.extent().norm() };
        let query = bounds.inflate(reach);
        let mut found_zero = false;
        big.for_each_triangle_in(&query, |bt| {
            let d = triangle::triangle_distance(tri, &big.triangle(bt));
            if d < best {
                best = d;
            }
            if d <= 0.0 {
                found_zero = true;
                return true;
            }
            false
        });
        if found_zero {
            return None;
        }
        if best < stop_below {
            return Some(best);
        }
    }
    Some(best)
}

fn canonical_first(a: &TriangleMesh, pa: &Pose, b: &TriangleMesh, pb: &Pose) -> bool {
    let (na, nb) = (a.triangles().len(), b.triangles().len());
    if na != nb {
        return na > nb;
    }
    let ka = pa.rotation.iter().chain(pa.translation.iter()).chain(a.vertices().iter().flat_map(|v| v.iter()));
    let kb = pb.rotation.iter().chain(pb.translation.iter()).chain(b.vertices().iter().flat_map(|v| v.iter()));
    for (x, y) in ka.zip(kb) {
        if x != y {
            return x < y;
        }
    }
    true
}

/// True iff the posed meshes overlap or their minimum distance is below
/// `clearance`.
pub fn mesh_intersects(a: &TriangleMesh, pose_a: &Pose, b: &TriangleMesh, pose_b: &Pose, clearance: f64) -> bool {
    match mesh_distance(a, pose_a, b, pose_b, clearance) {
        None => true,
        Some(d) => d < clearance,
    }
}
