//! OBJ and STL loading.

use std::fmt::Write as _;
use std::path::Path;

use gravgrasp_core::math::Vec3;
use gravgrasp_core::TriangleMesh;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

fn mesh_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Mesh { path: path.to_path_buf(), message: message.into() }
}

/// Loads an OBJ or STL file, multiplying coordinates by `scale` (use 0.001
/// for millimeter assets).
pub fn load_mesh(path: &Path, scale: f64) -> Result<TriangleMesh> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Input(format!("mesh scale must be positive, got {scale}")));
    }
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (vertices, triangles) = match ext.as_deref() {
        Some("obj") => read_obj(path)?,
        Some("stl") => read_stl(path)?,
        _ => return Err(mesh_error(path, "expected a .obj or .stl file")),
    };
    let vertices = vertices.into_iter().map(|v| v * scale).collect();
    TriangleMesh::new(vertices, triangles).map_err(|e| mesh_error(path, e.to_string()))
}

type RawMesh = (Vec<Vec3>, Vec<[u32; 3]>);

fn read_obj(path: &Path) -> Result<RawMesh> {
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    let opts = tobj::LoadOptions { triangulate: true, single_index: true, ..Default::default() };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| mesh_error(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in models {
        let base = vertices.len() as u32;
        vertices.extend(m.mesh.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        triangles.extend(m.mesh.indices.chunks_exact(3).map(|t| [base + t[0], base + t[1], base + t[2]]));
    }
    Ok((vertices, triangles))
}

fn read_stl(path: &Path) -> Result<RawMesh> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mesh = stl_io::read_stl(&mut file).map_err(|e| mesh_error(path, e.to_string()))?;
    let vertices = mesh.vertices.iter().map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)).collect();
    let triangles = mesh.faces.iter().map(|f| f.vertices.map(|i| i as u32)).collect();
    Ok((vertices, triangles))
}

/// Writes `mesh` as OBJ with shortest round-trip coordinates.
pub fn save_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gravgrasp_core::geometry::primitives::{box_mesh, cylinder};

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cyl.obj");
        let m = cylinder(0.0325, 0.2, 24);
        save_obj(&m, &p).unwrap();
        let back = load_mesh(&p, 1.0).unwrap();
        let sorted = |m: &TriangleMesh| {
            let mut v: Vec<[f64; 3]> = m.vertices().iter().map(|p| [p.x, p.y, p.z]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        assert_eq!(sorted(&back), sorted(&m));
        assert!(back.is_watertight());
    }

    #[test]
    fn millimeter_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("box.obj");
        save_obj(&box_mesh(Vec3::new(50.0, 40.0, 50.0)), &p).unwrap();
        let m = load_mesh(&p, 0.001).unwrap();
        let b = m.bounds();
        assert!((b.max - Vec3::new(0.05, 0.04, 0.05)).norm() < 1e-12);
    }

    #[test]
    fn stl_is_welded() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("box.stl");
        let m = box_mesh(Vec3::new(0.02, 0.02, 0.02));
        let tris: Vec<stl_io::Triangle> = m
            .triangles()
            .iter()
            .map(|t| {
                let v = t.map(|i| {
                    let p = m.vertices()[i as usize];
                    stl_io::Vertex::new([p.x as f32, p.y as f32, p.z as f32])
                });
                stl_io::Triangle { normal: stl_io::Normal::new([0.0; 3]), vertices: v }
            })
            .collect();
        let mut f = std::fs::File::create(&p).unwrap();
        stl_io::write_stl(&mut f, tris.iter()).unwrap();
        let back = load_mesh(&p, 1.0).unwrap();
        assert_eq!(back.vertices().len(), 8);
        assert!(back.is_watertight());
    }

    #[test]
    fn bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_mesh(&dir.path().join("missing.obj"), 1.0), Err(Error::Io { .. })));
        assert!(matches!(load_mesh(&dir.path().join("x.ply"), 1.0), Err(Error::Mesh { .. })));
        let p = dir.path().join("empty.obj");
        std::fs::write(&p, "# nothing\n").unwrap();
        assert!(matches!(load_mesh(&p, 1.0), Err(Error::Mesh { .. })));
        assert!(matches!(load_mesh(&p, 0.0), Err(Error::Input(_))));
    }
}
