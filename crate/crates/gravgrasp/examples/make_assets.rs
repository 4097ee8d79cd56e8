//! Writes the bundled object library to `assets/objects` (or the directory
//! given as the first argument).

use std::path::PathBuf;

use gravgrasp::fsutil::write_json;
use gravgrasp::mesh_io::save_obj;
use gravgrasp::pipeline::{LibraryEntry, LibraryManifest, LIBRARY_FILE};
use gravgrasp_core::geometry::primitives::{box_mesh, cylinder, uv_sphere};
use gravgrasp_core::math::Vec3;

fn main() -> gravgrasp::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/objects"));
    // id, mesh, mass [kg]
    let objects = [
        ("cylinder", cylinder(0.0325, 0.2, 32), 0.3),
        ("box", box_mesh(Vec3::new(0.05, 0.04, 0.05)), 0.4),
        ("cube", box_mesh(Vec3::new(0.025, 0.025, 0.025)), 0.15),
        ("can", cylinder(0.02, 0.12, 24), 0.15),
        ("ball", uv_sphere(0.03, 12, 16), 0.1),
    ];
    let mut entries = Vec::new();
    for (id, mesh, mass) in objects {
        let file = PathBuf::from(format!("{id}.obj"));
        save_obj(&mesh, &dir.join(&file))?;
        entries.push(LibraryEntry { id: id.into(), mesh: file, scale: 1.0, mass });
    }
    write_json(&dir.join(LIBRARY_FILE), &LibraryManifest { objects: entries })?;
    println!("wrote {}", dir.display());
    Ok(())
}
