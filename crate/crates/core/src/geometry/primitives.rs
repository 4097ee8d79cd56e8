//! Closed primitive meshes centered on their volume centroid.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::TriangleMesh;
use crate::math::{cos, sin, Vec3};

/// Axis-aligned box with the given half extents (8 vertices, 12 triangles).
pub fn box_mesh(half: Vec3) -> TriangleMesh {
    let (x, y, z) = (half.x, half.y, half.z);
    let v = alloc::vec![
        Vec3::new(-x, -y, -z),
        Vec3::new(x, -y, -z),
        Vec3::new(x, y, -z),
        Vec3::new(-x, y, -z),
        Vec3::new(-x, -y, z),
        Vec3::new(x, -y, z),
        Vec3::new(x, y, z),
        Vec3::new(-x, y, z),
    ];
    let t = alloc::vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(v, t).expect("box mesh is valid")
}

/// Closed cylinder along z, centered at the origin. `segments` should be a
/// multiple of 4 so the bounding box equals the nominal diameter.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3);
    let h = height / 2.0;
    let mut v = Vec::with_capacity(2 * n + 2);
    for k in 0..n {
        let a = 2.0 * PI * k as f64 / n as f64;
        v.push(Vec3::new(radius * cos(a), radius * sin(a), -h));
    }
    for k in 0..n {
        let a = 2.0 * PI * k as f64 / n as f64;
        v.push(Vec3::new(radius * cos(a), radius * sin(a), h));
    }
    let bottom = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -h));
    let top = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, h));
    let n32 = n as u32;
    let mut t = Vec::with_capacity(4 * n);
    for k in 0..n32 {
        let k1 = (k + 1) % n32;
        t.push([k, k1, n32 + k1]);
        t.push([k, n32 + k1, n32 + k]);
        t.push([bottom, k1, k]);
        t.push([top, n32 + k, n32 + k1]);
    }
    TriangleMesh::new(v, t).expect("cylinder mesh is valid")
}

/// Latitude–longitude sphere around z. Each quad is split into four
/// triangles around its center so the mesh is mirror-symmetric in x, y, z.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let stacks = stacks.max(2);
    let slices = slices.max(3);
    let mut v = Vec::new();
    let point = |theta: f64, phi: f64| {
        Vec3::new(radius * sin(theta) * cos(phi), radius * sin(theta) * sin(phi), radius * cos(theta))
    };
    v.push(Vec3::new(0.0, 0.0, radius));
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            v.push(point(theta, 2.0 * PI * j as f64 / slices as f64));
        }
    }
    let south = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -radius));
    let ring = |i: usize, j: usize| -> u32 { (1 + (i - 1) * slices + (j % slices)) as u32 };
    let mut t = Vec::new();
    for j in 0..slices {
        t.push([0, ring(1, j), ring(1, j + 1)]);
        t.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let theta = PI * (i as f64 + 0.5) / stacks as f64;
            let phi = 2.0 * PI * (j as f64 + 0.5) / slices as f64;
            let c = v.len() as u32;
            v.push(point(theta, phi));
            let (a, b, d, e) = (ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
            t.push([c, a, e]);
            t.push([c, e, d]);
            t.push([c, d, b]);
            t.push([c, b, a]);
        }
    }
    TriangleMesh::new(v, t).expect("sphere mesh is valid")
}
