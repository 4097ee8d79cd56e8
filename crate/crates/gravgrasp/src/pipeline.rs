//! Pipeline stages over files: sampling, closure and scoring, scene
//! composition with labels, and benchmark episodes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use gravgrasp_core::annotation::annotate_scene;
use gravgrasp_core::closure::{simulate_closure, ClosureFailure, ClosureObject};
use gravgrasp_core::eval::{
    compute_metrics, run_episode, with_mass, Detector, EpisodeConfig, EpisodeRecord, EvalContext, MetricsRow,
    OracleDetector, ScriptedOutcome, TopDownDetector,
};
use gravgrasp_core::geometry::{integrate_tsdf, render_depth};
use gravgrasp_core::sampling::{derive_seed, expand_with_perturbations, sample_antipodal_grasps, GraspCandidate};
use gravgrasp_core::scene::{compose_scene, project_grasps, LibraryObject, ObjectGrasps, Scene, ScoredGrasp};
use gravgrasp_core::wrench::disturbance_rejection_score;
use gravgrasp_core::TriangleMesh;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::{SceneDataset, SceneMeta, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::fsutil::read_json;
use crate::mesh_io::load_mesh;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const LIBRARY_FILE: &str = "library.json";
const SCENE_STREAM: u64 = 0x5343_454e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryEntry {
    pub id: String,
    /// Relative to the library directory.
    pub mesh: PathBuf,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub mass: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryManifest {
    pub objects: Vec<LibraryEntry>,
}

pub fn load_library(dir: &Path) -> Result<Vec<LibraryObject>> {
    let manifest: LibraryManifest = read_json(&dir.join(LIBRARY_FILE))?;
    if manifest.objects.is_empty() {
        return Err(Error::Input(format!("{} lists no objects", dir.join(LIBRARY_FILE).display())));
    }
    manifest
        .objects
        .iter()
        .map(|e| {
            if !(e.mass > 0.0) {
                return Err(Error::Input(format!("object `{}` needs a positive mass", e.id)));
            }
            Ok(LibraryObject { id: e.id.clone(), mesh: load_mesh(&dir.join(&e.mesh), e.scale)?, mass: e.mass })
        })
        .collect()
}

pub fn scores_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.scores.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateFile {
    pub config_hash: String,
    pub mesh_digest: String,
    pub candidates: Vec<GraspCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreFile {
    pub config_hash: String,
    pub object_id: String,
    pub grasps: Vec<ScoredGrasp>,
    /// Closure failures by kind.
    pub failures: BTreeMap<String, usize>,
}

/// Reads `<id>.scores.json` for every library object.
pub fn load_scores(dir: &Path, library: &[LibraryObject]) -> Result<Vec<ObjectGrasps>> {
    library
        .iter()
        .map(|o| {
            let p = scores_path(dir, &o.id);
            if !p.exists() {
                return Err(Error::MissingScores(o.id.clone()));
            }
            let f: ScoreFile = read_json(&p)?;
            Ok(ObjectGrasps { object_id: o.id.clone(), grasps: f.grasps })
        })
        .collect()
}

/// Antipodal seeds followed by their perturbations.
pub fn sample_candidates(mesh: &TriangleMesh, cfg: &PipelineConfig) -> Result<Vec<GraspCandidate>> {
    let seeds = sample_antipodal_grasps(mesh, &cfg.sampler, &cfg.gripper).map_err(|e| Error::Config(e.to_string()))?;
    Ok(expand_with_perturbations(&seeds, &cfg.sampler))
}

fn failure_name(f: &ClosureFailure) -> &'static str {
    match f {
        ClosureFailure::NoContact => "no_contact",
        ClosureFailure::Ejected => "ejected",
        ClosureFailure::InitialPenetration => "initial_penetration",
        ClosureFailure::Hand(_) => "hand",
        ClosureFailure::InvalidConfig(_) => "invalid_config",
    }
}

/// Closes the hand on every candidate and scores the settled grasps.
/// `progress(done, total)` fires after every 100th grasp. Output keeps
/// candidate order.
pub fn refine_and_score(
    mesh: &TriangleMesh,
    candidates: &[GraspCandidate],
    cfg: &PipelineConfig,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<(Vec<ScoredGrasp>, BTreeMap<String, usize>)> {
    let object = ClosureObject::new(mesh, cfg.closure.point_spacing);
    let limits = cfg.limits();
    let done = AtomicUsize::new(0);
    let results: Vec<Result<ScoredGrasp, ClosureFailure>> = candidates
        .par_iter()
        .map(|c| {
            let out = simulate_closure(&cfg.gripper, &object, c, &cfg.closure).map(|settled| {
                let score = disturbance_rejection_score(&settled.contacts, &object.com, &limits, &cfg.search)
                    .expect("validated limits and unit directions");
                ScoredGrasp { settled, score }
            });
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(100) {
                progress(n, candidates.len());
            }
            out
        })
        .collect();
    let mut grasps = Vec::new();
    let mut failures = BTreeMap::new();
    for r in results {
        match r {
            Ok(g) => grasps.push(g),
            Err(ClosureFailure::InvalidConfig(m)) => return Err(Error::Config(m.into())),
            Err(e) => *failures.entry(failure_name(&e).to_owned()).or_insert(0) += 1,
        }
    }
    Ok((grasps, failures))
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Scene directories under `dir` in index order.
pub fn scene_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("scene_")))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Input(format!("{} contains no scene_* directories", dir.display())));
    }
    Ok(dirs)
}

/// Seed and object count of scene `index`.
pub fn scene_seed(cfg: &PipelineConfig, index: usize) -> (u64, usize) {
    let seed = derive_seed(cfg.scenes.seed, SCENE_STREAM, index as u64);
    let span = (cfg.scenes.max_objects - cfg.scenes.min_objects + 1) as u64;
    (seed, cfg.scenes.min_objects + (seed % span) as usize)
}

/// Composes scene `index`, projects and annotates its grasps and renders
/// its TSDF.
pub fn build_scene(
    library: &[LibraryObject],
    grasps: &[ObjectGrasps],
    cfg: &PipelineConfig,
    index: usize,
) -> Result<SceneDataset> {
    let (seed, n) = scene_seed(cfg, index);
    let composed = compose_scene(library, n, seed, &cfg.scenes.placement).map_err(|e| Error::Config(e.to_string()))?;
    let scene = composed.scene;
    let projected = project_grasps(&scene, library, grasps, &cfg.gripper, &cfg.projection).map_err(|e| match e {
        gravgrasp_core::scene::SceneError::MissingGrasps(id) => Error::MissingScores(id),
        e => Error::Input(e.to_string()),
    })?;
    let labels =
        annotate_scene(&projected, &cfg.grid, cfg.rotation_order).map_err(|e| Error::Internal(e.to_string()))?;
    let tsdf = render_tsdf(&scene, library, cfg)?;
    let meta = SceneMeta {
        format_version: FORMAT_VERSION,
        toolkit_version: TOOLKIT_VERSION.into(),
        config_hash: cfg.hash(),
        scene_index: index,
        requested_objects: n,
        truncation: cfg.truncation(),
        rotation_order: cfg.rotation_order,
        grasps_projected: projected.len(),
        grasps_outside_grid: labels.skipped,
        valid_voxels: labels.valid_count(),
        scene,
    };
    Ok(SceneDataset { meta, tsdf, labels })
}

pub fn render_tsdf(
    scene: &Scene,
    library: &[LibraryObject],
    cfg: &PipelineConfig,
) -> Result<gravgrasp_core::geometry::VoxelVolume> {
    let posed = scene
        .objects
        .iter()
        .map(|o| {
            library
                .iter()
                .find(|l| l.id == o.mesh_id)
                .map(|l| (&l.mesh, o.pose))
                .ok_or_else(|| Error::Input(format!("scene uses unknown object `{}`", o.mesh_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let camera = cfg.camera();
    let depth = render_depth(&posed, &camera, cfg.noise(scene.seed));
    let tsdf =
        integrate_tsdf(&depth, &camera, &cfg.grid, cfg.truncation()).map_err(|e| Error::Config(e.to_string()))?;
    Ok(tsdf.volume)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Oracle,
    TopDown,
    ScriptedSuccess,
    ScriptedFail,
}

impl DetectorKind {
    pub const NAMES: [&'static str; 4] = ["oracle", "topdown", "scripted-success", "scripted-fail"];
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => Self::Oracle,
            "topdown" => Self::TopDown,
            "scripted-success" => Self::ScriptedSuccess,
            "scripted-fail" => Self::ScriptedFail,
            _ => return Err(Error::Input(format!("unknown detector `{s}`; available: {}", Self::NAMES.join(", ")))),
        })
    }
}

fn make_detector<'a>(
    kind: DetectorKind,
    library: &'a [LibraryObject],
    grasps: &'a [ObjectGrasps],
    cfg: &PipelineConfig,
) -> Box<dyn Detector + 'a> {
    match kind {
        DetectorKind::Oracle => Box::new(OracleDetector {
            library,
            grasps,
            gripper: cfg.gripper,
            projection: cfg.projection,
            grid: cfg.grid,
        }),
        DetectorKind::TopDown => {
            Box::new(TopDownDetector { distal_length: cfg.gripper.distal_length, ..TopDownDetector::default() })
        }
        DetectorKind::ScriptedSuccess => Box::new(ScriptedOutcome { success: true }),
        DetectorKind::ScriptedFail => Box::new(ScriptedOutcome { success: false }),
    }
}

pub fn episode_config(cfg: &PipelineConfig, seed: u64) -> EpisodeConfig {
    EpisodeConfig {
        camera: cfg.camera(),
        grid: cfg.grid,
        truncation: cfg.truncation(),
        noise: cfg.noise(seed),
        approach_clearance: cfg.eval.approach_clearance,
        approach_step: cfg.eval.approach_step,
    }
}

/// Parses `start:stop:step` (inclusive) or a comma list of weights [kg].
pub fn parse_weights(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Input(format!("invalid weights `{spec}`; use start:stop:step or a comma list"));
    let weights: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0 && stop >= start) {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded to the microgram so that 0.1 + 3 * 0.2 prints as 0.7.
        (0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(bad());
    }
    Ok(weights)
}

/// Episodes of every scene at one weight, scenes run in parallel.
pub fn run_weight(
    ctx: &EvalContext<'_>,
    scenes: &[Scene],
    grasps: &[ObjectGrasps],
    kind: DetectorKind,
    weight: f64,
    cfg: &PipelineConfig,
) -> Result<Vec<EpisodeRecord>> {
    scenes
        .par_iter()
        .map(|s| {
            let mut detector = make_detector(kind, ctx.library, grasps, cfg);
            run_episode(&with_mass(s, weight), ctx, &mut detector, &episode_config(cfg, s.seed))
                .map_err(|e| Error::Input(e.to_string()))
        })
        .collect()
}

/// One metrics row per weight.
pub fn evaluate(
    library: &[LibraryObject],
    grasps: &[ObjectGrasps],
    scenes: &[Scene],
    kind: DetectorKind,
    weights: &[f64],
    cfg: &PipelineConfig,
) -> Result<Vec<MetricsRow>> {
    let mut ctx = EvalContext::new(library, cfg.gripper, cfg.closure).map_err(|e| Error::Config(e.to_string()))?;
    ctx.limits = cfg.limits();
    ctx.search = cfg.search;
    weights.iter().map(|&w| Ok(compute_metrics(&run_weight(&ctx, scenes, grasps, kind, w, cfg)?, w))).collect()
}
