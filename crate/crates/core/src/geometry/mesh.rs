use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use super::aabb::Aabb;
use super::triangle::{self, Feature};
use super::GeometryError;
use crate::math::{sqrt, Vec3};

/// Triangles with area below this are dropped during validation [m²].
const DEGENERATE_AREA: f64 = 1e-14;
const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
    pub feature: Feature,
}

/// Result of [`TriangleMesh::distance`]. `distance` is signed when
/// `sign_valid`, otherwise unsigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceQuery {
    pub distance: f64,
    pub sign_valid: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub point: Vec3,
    pub normal: Vec3,
}

/// Validated triangle mesh in meters with a bounding volume hierarchy.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    watertight: bool,
    face_normals: Vec<Vec3>,
    areas: Vec<f64>,
    cumulative_area: Vec<f64>,
    vertex_normals: Vec<Vec3>,
    edge_normals: BTreeMap<(u32, u32), Vec3>,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl TriangleMesh {
    /// Validates and indexes a mesh. Degenerate triangles are removed; closed
    /// meshes are reoriented so that face normals point outward.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        let n = vertices.len() as u32;
        if triangles.iter().flatten().any(|&i| i >= n) {
            return Err(GeometryError::IndexOutOfRange);
        }
        let mut triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                triangle::triangle_area(&a, &b, &c) > DEGENERATE_AREA
            })
            .collect();
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let watertight = is_closed_manifold(&triangles);
        if watertight && signed_volume(&vertices, &triangles) < 0.0 {
            for t in triangles.iter_mut() {
                t.swap(1, 2);
            }
        }
        Ok(Self::index(vertices, triangles, watertight))
    }

    fn index(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, watertight: bool) -> Self {
        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut cumulative_area = Vec::with_capacity(triangles.len());
        let mut vertex_normals = alloc::vec![Vec3::zeros(); vertices.len()];
        let mut edge_normals: BTreeMap<(u32, u32), Vec3> = BTreeMap::new();
        let mut total = 0.0;
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            let normal = cross.normalize();
            face_normals.push(normal);
            areas.push(area);
            total += area;
            cumulative_area.push(total);
            let corners = [a, b, c];
            for k in 0..3 {
                let p = corners[k];
                let e1 = (corners[(k + 1) % 3] - p).normalize();
                let e2 = (corners[(k + 2) % 3] - p).normalize();
                let angle = crate::math::acos(e1.dot(&e2));
                vertex_normals[t[k] as usize] += normal * angle;
                let key = edge_key(t[k], t[(k + 1) % 3]);
                *edge_normals.entry(key).or_insert_with(Vec3::zeros) += normal;
            }
        }
        for n in vertex_normals.iter_mut() {
            if n.norm_squared() > 0.0 {
                *n = n.normalize();
            }
        }
        for n in edge_normals.values_mut() {
            if n.norm_squared() > 0.0 {
                *n = n.normalize();
            }
        }
        let mut mesh = Self {
            vertices,
            triangles,
            watertight,
            face_normals,
            areas,
            cumulative_area,
            vertex_normals,
            edge_normals,
            nodes: Vec::new(),
            order: Vec::new(),
        };
        mesh.build_bvh();
        mesh
    }

    /// Uniformly scaled copy (e.g. millimeter assets with `scale = 0.001`).
    pub fn scaled(&self, scale: f64) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::DegenerateScale);
        }
        let vertices = self.vertices.iter().map(|v| v * scale).collect();
        TriangleMesh::new(vertices, self.triangles.clone())
    }

    /// Copy with every vertex mapped through `pose`.
    pub fn transformed(&self, pose: &super::Pose) -> Self {
        let vertices = self.vertices.iter().map(|v| pose.transform_point(v)).collect();
        Self::index(vertices, self.triangles.clone(), self.watertight)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn face_normal(&self, tri: usize) -> Vec3 {
        self.face_normals[tri]
    }

    pub fn triangle(&self, tri: usize) -> [Vec3; 3] {
        self.triangles[tri].map(|i| self.vertices[i as usize])
    }

    pub fn surface_area(&self) -> f64 {
        *self.cumulative_area.last().unwrap_or(&0.0)
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Volume centroid for closed meshes, area centroid otherwise.
    pub fn centroid(&self) -> Vec3 {
        if self.watertight {
            let mut vol = 0.0;
            let mut acc = Vec3::zeros();
            for t in &self.triangles {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                let v = a.dot(&b.cross(&c)) / 6.0;
                vol += v;
                acc += (a + b + c) * (v / 4.0);
            }
            if vol.abs() > 0.0 {
                return acc / vol;
            }
        }
        let mut acc = Vec3::zeros();
        for (t, area) in self.triangles.iter().zip(&self.areas) {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            acc += (a + b + c) * (area / 3.0);
        }
        acc / self.surface_area()
    }

    pub fn volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.triangles).abs()
    }

    /// Area-weighted uniform surface sample: point, outward face normal, triangle.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3, usize) {
        let total = self.surface_area();
        let target = rng.random::<f64>() * total;
        let idx = self.cumulative_area.partition_point(|&c| c < target).min(self.triangles.len() - 1);
        let [a, b, c] = self.triangle(idx);
        let r1 = sqrt(rng.random::<f64>());
        let r2 = rng.random::<f64>();
        let p = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
        (p, self.face_normals[idx], idx)
    }

    /// Deterministic surface point set: triangles are bisected on their
    /// longest edge until every edge is at most `spacing`; the vertices of
    /// the pieces are emitted once each.
    pub fn surface_points(&self, spacing: f64) -> Vec<Vec3> {
        let mut seen: BTreeMap<[i64; 3], ()> = BTreeMap::new();
        let mut out = Vec::new();
        let quant = 1e-9;
        let mut emit = |p: Vec3, out: &mut Vec<Vec3>| {
            let key = [
                crate::math::floor(p.x / quant + 0.5) as i64,
                crate::math::floor(p.y / quant + 0.5) as i64,
                crate::math::floor(p.z / quant + 0.5) as i64,
            ];
            if seen.insert(key, ()).is_none() {
                out.push(p);
            }
        };
        let mut stack = Vec::new();
        for t in 0..self.triangles.len() {
            stack.push(self.triangle(t));
            while let Some([a, b, c]) = stack.pop() {
                let edges = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
                let (i, longest) =
                    edges
                        .iter()
                        .copied()
                        .enumerate()
                        .fold((0, 0.0), |best, (i, l)| if l > best.1 { (i, l) } else { best });
                if longest <= spacing {
                    for p in [a, b, c] {
                        emit(p, &mut out);
                    }
                    continue;
                }
                // Rotate so the longest edge is (u, v), then split it.
                let [u, v, w] = match i {
                    0 => [a, b, c],
                    1 => [b, c, a],
                    _ => [c, a, b],
                };
                let m = (u + v) * 0.5;
                stack.push([m, v, w]);
                stack.push([u, m, w]);
            }
        }
        out
    }

    /// Closest surface point to `p`.
    pub fn closest_point(&self, p: &Vec3) -> ClosestPoint {
        let mut best =
            ClosestPoint { point: Vec3::zeros(), distance: f64::INFINITY, triangle: 0, feature: Feature::Face };
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<u32> = alloc::vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance_squared(p) > best_d2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start as usize..(start + count) as usize] {
                        let [a, b, c] = self.triangle(ti as usize);
                        let (cp, feature) = triangle::closest_point(p, &a, &b, &c);
                        let d2 = (cp - p).norm_squared();
                        if d2 < best_d2 {
                            best_d2 = d2;
                            best = ClosestPoint { point: cp, distance: 0.0, triangle: ti as usize, feature };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left as usize].bounds.distance_squared(p);
                    let dr = self.nodes[right as usize].bounds.distance_squared(p);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.distance = sqrt(best_d2);
        best
    }

    /// Angle-weighted pseudonormal of the closest feature.
    fn pseudonormal(&self, tri: usize, feature: Feature) -> Vec3 {
        let t = self.triangles[tri];
        match feature {
            Feature::Face => self.face_normals[tri],
            Feature::Edge(k) => {
                let key = edge_key(t[k as usize], t[(k as usize + 1) % 3]);
                self.edge_normals[&key]
            }
            Feature::Vertex(k) => self.vertex_normals[t[k as usize] as usize],
        }
    }

    /// Signed distance for closed meshes (negative inside), unsigned otherwise.
    pub fn distance(&self, p: &Vec3) -> DistanceQuery {
        let cp = self.closest_point(p);
        if !self.watertight {
            return DistanceQuery { distance: cp.distance, sign_valid: false };
        }
        let n = self.pseudonormal(cp.triangle, cp.feature);
        let sign = if (p - cp.point).dot(&n) < 0.0 { -1.0 } else { 1.0 };
        DistanceQuery { distance: sign * cp.distance, sign_valid: true }
    }

    /// Signed distance; fails on meshes that are not closed manifolds.
    pub fn signed_distance(&self, p: &Vec3) -> Result<f64, GeometryError> {
        let q = self.distance(p);
        if q.sign_valid {
            Ok(q.distance)
        } else {
            Err(GeometryError::NotWatertight)
        }
    }

    /// First intersection of the ray `origin + t·dir`, `t ∈ (t_min, t_max]`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<RayHit> {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best_t = t_max;
        let mut best_tri = usize::MAX;
        let mut stack: Vec<u32> = alloc::vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(origin, &inv, best_t).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start as usize..(start + count) as usize] {
                        let [a, b, c] = self.triangle(ti as usize);
                        if let Some(t) = triangle::ray_intersect(origin, dir, &a, &b, &c) {
                            // Ties resolve to the lower triangle index for determinism.
                            if t > t_min && (t < best_t || (t == best_t && (ti as usize) < best_tri)) {
                                best_t = t;
                                best_tri = ti as usize;
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        if best_tri == usize::MAX {
            return None;
        }
        Some(RayHit {
            t: best_t,
            triangle: best_tri,
            point: origin + dir * best_t,
            normal: self.face_normals[best_tri],
        })
    }

    /// Calls `f` with every triangle whose bounds overlap `query`.
    pub fn for_each_triangle_in(&self, query: &Aabb, mut f: impl FnMut(usize) -> bool) -> bool {
        let mut stack: Vec<u32> = alloc::vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.bounds.overlaps(query) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start as usize..(start + count) as usize] {
                        if f(ti as usize) {
                            return true;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }

    fn build_bvh(&mut self) {
        let centroids: Vec<Vec3> = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (a + b + c) / 3.0
            })
            .collect();
        let tri_bounds: Vec<Aabb> = (0..self.triangles.len())
            .map(|t| {
                let tri = self.triangle(t);
                Aabb::from_points(tri.iter())
            })
            .collect();
        self.order = (0..self.triangles.len() as u32).collect();
        self.nodes.clear();
        self.nodes.push(Node { bounds: Aabb::empty(), kind: NodeKind::Leaf { start: 0, count: 0 } });
        let mut work: Vec<(u32, usize, usize)> = alloc::vec![(0, 0, self.triangles.len())];
        while let Some((ni, start, end)) = work.pop() {
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &ti in &self.order[start..end] {
                bounds = bounds.merge(&tri_bounds[ti as usize]);
                cbounds.grow(&centroids[ti as usize]);
            }
            let count = end - start;
            if count <= LEAF_SIZE {
                self.nodes[ni as usize] =
                    Node { bounds, kind: NodeKind::Leaf { start: start as u32, count: count as u32 } };
                continue;
            }
            let ext = cbounds.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = start + count / 2;
            self.order[start..end].sort_by(|&a, &b| {
                let ca = centroids[a as usize][axis];
                let cb = centroids[b as usize][axis];
                ca.partial_cmp(&cb).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            let left = self.nodes.len() as u32;
            let right = left + 1;
            for _ in 0..2 {
                self.nodes.push(Node { bounds: Aabb::empty(), kind: NodeKind::Leaf { start: 0, count: 0 } });
            }
            self.nodes[ni as usize] = Node { bounds, kind: NodeKind::Inner { left, right } };
            work.push((right, mid, end));
            work.push((left, start, mid));
        }
    }
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_volume(vertices: &[Vec3], triangles: &[[u32; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

/// Every directed edge appears once and its reverse appears once.
fn is_closed_manifold(triangles: &[[u32; 3]]) -> bool {
    let mut directed: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    directed.iter().all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
}
