//! Scene dataset directories: `meta.json`, `tsdf.bin`, `labels.bin`.
//!
//! Volume files are little-endian:
//!
//! ```text
//! magic       b"GGRD"
//! version     u32
//! dims        3 x u32
//! voxel_size  f64
//! origin      3 x f64
//! n_channels  u32
//! names       n_channels x (u32 length, UTF-8 bytes)
//! data        n_channels x (dims product) x f32, channel after channel
//! crc32       u32 over every preceding byte
//! ```

use std::path::Path;

use gravgrasp_core::annotation::{BasisOrder, VoxelAnnotation};
use gravgrasp_core::geometry::{GridSpec, VoxelVolume};
use gravgrasp_core::scene::Scene;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::fsutil::{read, read_json, write_atomic, write_json};

pub const MAGIC: &[u8; 4] = b"GGRD";
pub const FORMAT_VERSION: u32 = 1;

pub const META_FILE: &str = "meta.json";
pub const TSDF_FILE: &str = "tsdf.bin";
pub const LABELS_FILE: &str = "labels.bin";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic, not a GGRD volume")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch")]
    Checksum,
    #[error("invalid header: {0}")]
    Header(&'static str),
    #[error("{0} trailing bytes after the checksum")]
    Trailing(usize),
}

pub fn encode_volume(volume: &VoxelVolume) -> Vec<u8> {
    let g = &volume.grid;
    let mut out = Vec::with_capacity(64 + volume.channels().len() * g.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.voxel_size.to_le_bytes());
    for o in g.origin {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&(volume.channels().len() as u32).to_le_bytes());
    for c in volume.channels() {
        out.extend_from_slice(&(c.name.len() as u32).to_le_bytes());
        out.extend_from_slice(c.name.as_bytes());
    }
    for c in volume.channels() {
        for v in &c.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        self.array().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        self.array().map(f64::from_le_bytes)
    }
}

pub fn decode_volume(bytes: &[u8]) -> Result<VoxelVolume, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let voxel_size = r.f64()?;
    let origin = [r.f64()?, r.f64()?, r.f64()?];
    let grid = GridSpec { origin, voxel_size, dims };
    let mut volume = VoxelVolume::new(grid).map_err(|_| FormatError::Header("grid"))?;
    let n = r.u32()? as usize;
    let mut names = Vec::new();
    for _ in 0..n {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| FormatError::Header("channel name"))?;
        names.push(name.to_owned());
    }
    let len = grid.len();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = r.take(len.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        data.push(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect::<Vec<_>>());
    }
    let body = r.pos;
    let crc = r.u32()?;
    if crc32fast::hash(&bytes[..body]) != crc {
        return Err(FormatError::Checksum);
    }
    if r.pos != bytes.len() {
        return Err(FormatError::Trailing(bytes.len() - r.pos));
    }
    for (name, d) in names.iter().zip(data) {
        if volume.channel(name).is_some() {
            return Err(FormatError::Header("duplicate channel"));
        }
        volume.insert_channel(name, d).map_err(|_| FormatError::Header("channel length"))?;
    }
    Ok(volume)
}

pub fn write_volume(path: &Path, volume: &VoxelVolume) -> Result<()> {
    write_atomic(path, &encode_volume(volume))
}

pub fn read_volume(path: &Path) -> Result<VoxelVolume> {
    decode_volume(&read(path)?).map_err(|source| Error::Dataset { path: path.to_path_buf(), source })
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub format_version: u32,
    pub toolkit_version: String,
    pub config_hash: String,
    pub scene_index: usize,
    pub scene: Scene,
    /// Objects requested before placement rejections.
    pub requested_objects: usize,
    pub truncation: f64,
    pub rotation_order: BasisOrder,
    pub grasps_projected: usize,
    pub grasps_outside_grid: usize,
    pub valid_voxels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    pub meta: SceneMeta,
    pub tsdf: VoxelVolume,
    pub labels: VoxelAnnotation,
}

pub fn write_dataset(dir: &Path, data: &SceneDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_volume(&dir.join(TSDF_FILE), &data.tsdf)?;
    write_volume(&dir.join(LABELS_FILE), &data.labels.volume)?;
    write_json(&dir.join(META_FILE), &data.meta)
}

pub fn read_dataset(dir: &Path) -> Result<SceneDataset> {
    let meta: SceneMeta = read_json(&dir.join(META_FILE))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Dataset { path: dir.join(META_FILE), source: FormatError::Version(meta.format_version) });
    }
    let tsdf = read_volume(&dir.join(TSDF_FILE))?;
    let labels = VoxelAnnotation {
        volume: read_volume(&dir.join(LABELS_FILE))?,
        order: meta.rotation_order,
        skipped: meta.grasps_outside_grid,
    };
    Ok(SceneDataset { meta, tsdf, labels })
}
