//! Primitive queries on single triangles and segments.

use crate::math::Vec3;

/// Which part of a triangle a closest point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Edge between corner `k` and corner `(k + 1) % 3`.
    Edge(u8),
    Vertex(u8),
}

/// Closest point on triangle `(a, b, c)` to `p` (Ericson, RTCD 5.1.5).
pub fn closest_point(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Möller–Trumbore. Returns the ray parameter `t` of the hit (two-sided).
pub fn ray_intersect(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    const EPS: f64 = 1e-14;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < EPS * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}

/// Closest points between segments `p1q1` and `p2q2` (RTCD 5.1.9); returns the distance.
pub fn segment_segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    const EPS: f64 = 1e-18;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

fn segment_hits_triangle(p: &Vec3, q: &Vec3, tri: &[Vec3; 3]) -> bool {
    let d = q - p;
    match ray_intersect(p, &d, &tri[0], &tri[1], &tri[2]) {
        Some(t) => (0.0..=1.0).contains(&t),
        None => false,
    }
}

fn lex_less(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    for i in 0..3 {
        for k in 0..3 {
            if a[i][k] != b[i][k] {
                return a[i][k] < b[i][k];
            }
        }
    }
    false
}

/// Euclidean distance between two triangles (zero when they intersect).
///
/// Arguments are put in a canonical order first, so the result is bitwise
/// symmetric.
pub fn triangle_distance(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> f64 {
    let (a, b) = if lex_less(t2, t1) { (t2, t1) } else { (t1, t2) };
    for k in 0..3 {
        if segment_hits_triangle(&a[k], &a[(k + 1) % 3], b) || segment_hits_triangle(&b[k], &b[(k + 1) % 3], a) {
            return 0.0;
        }
    }
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let (cp, _) = closest_point(&a[k], &b[0], &b[1], &b[2]);
        best = best.min((cp - a[k]).norm());
        let (cp, _) = closest_point(&b[k], &a[0], &a[1], &a[2]);
        best = best.min((cp - b[k]).norm());
    }
    for i in 0..3 {
        for j in 0..3 {
            best = best.min(segment_segment_distance(&a[i], &a[(i + 1) % 3], &b[j], &b[(j + 1) % 3]));
        }
    }
    best
}

/// Separating-axis test between a triangle and an axis-aligned box centred at
/// the origin with the given half extents (Akenine-Möller).
pub fn triangle_overlaps_box(tri: &[Vec3; 3], half: &Vec3) -> bool {
    let v = tri;
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    // Nine cross-product axes.
    for edge in &e {
        for axis_idx in 0..3 {
            let mut unit = Vec3::zeros();
            unit[axis_idx] = 1.0;
            let axis = unit.cross(edge);
            if axis.norm_squared() < 1e-30 {
                continue;
            }
            let p: [f64; 3] = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
            let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
            let mn = p[0].min(p[1]).min(p[2]);
            let mx = p[0].max(p[1]).max(p[2]);
            if mn > r || mx < -r {
                return false;
            }
        }
    }
    // Box face normals.
    for i in 0..3 {
        let mn = v[0][i].min(v[1][i]).min(v[2][i]);
        let mx = v[0][i].max(v[1][i]).max(v[2][i]);
        if mn > half[i] || mx < -half[i] {
            return false;
        }
    }
    // Triangle normal.
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v[0]);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    d.abs() <= r
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [Vec3; 3] {
        [Vec3::from(a), Vec3::from(b), Vec3::from(c)]
    }

    #[test]
    fn closest_point_regions() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let (p, f) = closest_point(&Vec3::new(0.2, 0.2, 1.0), &t[0], &t[1], &t[2]);
        assert_eq!(f, Feature::Face);
        assert!((p - Vec3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        let (_, f) = closest_point(&Vec3::new(-1.0, -1.0, 0.0), &t[0], &t[1], &t[2]);
        assert_eq!(f, Feature::Vertex(0));
        let (p, f) = closest_point(&Vec3::new(0.5, -1.0, 0.0), &t[0], &t[1], &t[2]);
        assert_eq!(f, Feature::Edge(0));
        assert!((p - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let (_, f) = closest_point(&Vec3::new(1.0, 1.0, 0.0), &t[0], &t[1], &t[2]);
        assert_eq!(f, Feature::Edge(1));
    }

    #[test]
    fn parallel_triangles_distance() {
        let a = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = tri([0.0, 0.0, 0.3], [1.0, 0.0, 0.3], [0.0, 1.0, 0.3]);
        assert!((triangle_distance(&a, &b) - 0.3).abs() < 1e-15);
        assert_eq!(triangle_distance(&a, &b), triangle_distance(&b, &a));
    }

    #[test]
    fn crossing_triangles_have_zero_distance() {
        let a = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = tri([0.2, 0.2, -0.5], [0.2, 0.2, 0.5], [0.9, 0.9, 0.0]);
        assert_eq!(triangle_distance(&a, &b), 0.0);
    }

    #[test]
    fn box_sat() {
        let half = Vec3::new(0.5, 0.5, 0.5);
        let inside = tri([0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]);
        assert!(triangle_overlaps_box(&inside, &half));
        let far = tri([2.0, 0.0, 0.0], [3.0, 0.0, 0.0], [2.0, 1.0, 0.0]);
        assert!(!triangle_overlaps_box(&far, &half));
        // Large triangle slicing through the box without any vertex inside.
        let big = tri([-5.0, -5.0, 0.1], [5.0, -5.0, 0.1], [0.0, 5.0, 0.1]);
        assert!(triangle_overlaps_box(&big, &half));
        // Triangle near a corner but separated along the diagonal.
        let diag = tri([0.9, 0.9, 0.0], [0.9, 0.0, 0.9], [0.0, 0.9, 0.9]);
        assert!(!triangle_overlaps_box(&diag, &half));
    }
}
