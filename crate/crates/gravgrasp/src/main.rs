use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gravgrasp::dataset::{write_dataset, SceneMeta, LABELS_FILE, META_FILE, TSDF_FILE};
use gravgrasp::fsutil::{cache_dir, read, read_json, sha256_hex, write_atomic, write_json};
use gravgrasp::manifest::{RunManifest, MANIFEST_FILE};
use gravgrasp::mesh_io::load_mesh;
use gravgrasp::pipeline::{
    build_scene, evaluate, load_library, load_scores, parse_weights, refine_and_score, sample_candidates,
    scene_dir_name, scene_dirs, CandidateFile, DetectorKind, ScoreFile, LIBRARY_FILE,
};
use gravgrasp::report::{label_slice_svg, metrics_svg, read_metrics_csv, write_metrics_csv, Plane};
use gravgrasp::{dataset, Error, PipelineConfig, Result};

/// Gravity-aware grasp dataset generation and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "gravgrasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample antipodal candidates on one mesh.
    Sample {
        #[arg(long)]
        mesh: PathBuf,
        /// Coordinate scale, e.g. 0.001 for millimeter files.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Overrides the number of surface samples.
        #[arg(long)]
        count: Option<usize>,
        /// Overrides the sampler seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Close the hand on every candidate and score the settled grasps.
    RefineScore {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Object id written into the score file; defaults to the mesh stem.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compose scenes from a library and write TSDF and label volumes.
    ComposeAnnotate {
        /// Directory holding library.json and the meshes.
        #[arg(long)]
        library: PathBuf,
        /// Directory holding <id>.scores.json; defaults to the library.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Overrides the scene count from the config.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run benchmark episodes over a weight sweep and write the metrics CSV.
    Eval {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        scores: Option<PathBuf>,
        /// oracle, topdown, scripted-success or scripted-fail.
        #[arg(long, default_value = "oracle")]
        detector: String,
        /// start:stop:step or a comma list [kg].
        #[arg(long, default_value = "0.1:1.5:0.2")]
        weights: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render a metrics CSV or a label volume slice as SVG.
    Plot {
        #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
        csv: Option<PathBuf>,
        /// labels.bin or a scene directory.
        #[arg(long, requires = "plane")]
        labels: Option<PathBuf>,
        /// Slice such as z=0.08.
        #[arg(long)]
        plane: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(Error::Input("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(|e| Error::Internal(e.to_string()))
}

fn load_config(common: &Common, manifest_inputs: Option<&mut RunManifest>) -> Result<PipelineConfig> {
    let cfg = PipelineConfig::load_or_default(common.config.as_deref())?;
    if let (Some(m), Some(p)) = (manifest_inputs, &common.config) {
        m.add_input(p)?;
    }
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("object").to_owned()
}

fn cmd_sample(
    mesh: &Path,
    scale: f64,
    count: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    common: &Common,
) -> Result<()> {
    let mut cfg = load_config(common, None)?;
    if let Some(n) = count {
        cfg.sampler.n_surface_samples = n;
    }
    if let Some(s) = seed {
        cfg.sampler.rng_seed = s;
    }
    cfg.validate()?;
    let m = load_mesh(mesh, scale)?;
    let candidates = thread_pool(common.jobs)?.install(|| sample_candidates(&m, &cfg))?;
    eprintln!("sampled {} candidates", candidates.len());
    write_json(out, &CandidateFile { config_hash: cfg.hash(), mesh_digest: sha256_hex(&read(mesh)?), candidates })
}

fn cmd_refine_score(
    candidates: &Path,
    mesh: &Path,
    scale: f64,
    id: Option<String>,
    out: &Path,
    common: &Common,
) -> Result<()> {
    let cfg = load_config(common, None)?;
    let file: CandidateFile = read_json(candidates)?;
    let object_id = id.unwrap_or_else(|| stem(mesh));
    let mesh_bytes = read(mesh)?;
    let key = sha256_hex(
        format!(
            "{}\n{}\n{}\n{scale}\n{object_id}",
            cfg.hash(),
            sha256_hex(&mesh_bytes),
            sha256_hex(&read(candidates)?)
        )
        .as_bytes(),
    );
    let cached = cache_dir().map(|d| d.join(format!("{key}.scores.json")));
    if let Some(c) = cached.as_ref().filter(|c| c.exists()) {
        eprintln!("using cached scores {}", c.display());
        return write_atomic(out, &read(c)?);
    }
    let m = load_mesh(mesh, scale)?;
    let (grasps, failures) = thread_pool(common.jobs)?
        .install(|| refine_and_score(&m, &file.candidates, &cfg, |done, total| eprintln!("scored {done}/{total}")))?;
    eprintln!("{} settled grasps, {} closure failures", grasps.len(), failures.values().sum::<usize>());
    let scores = ScoreFile { config_hash: cfg.hash(), object_id, grasps, failures };
    write_json(out, &scores)?;
    if let Some(c) = cached {
        write_json(&c, &scores)?;
    }
    Ok(())
}

fn cmd_compose_annotate(
    library_dir: &Path,
    scores: Option<&Path>,
    count: Option<usize>,
    out: &Path,
    common: &Common,
) -> Result<()> {
    let mut manifest = RunManifest::new("compose-annotate", String::new());
    let mut cfg = load_config(common, Some(&mut manifest))?;
    if let Some(n) = count {
        cfg.scenes.count = n;
    }
    manifest.config_hash = cfg.hash();
    let scores_dir = scores.unwrap_or(library_dir);
    let (library, grasps) = manifest.time("load", || -> Result<_> {
        let library = load_library(library_dir)?;
        let grasps = load_scores(scores_dir, &library)?;
        Ok((library, grasps))
    })?;
    manifest.add_input(&library_dir.join(LIBRARY_FILE))?;
    for o in &library {
        manifest.add_input(&gravgrasp::pipeline::scores_path(scores_dir, &o.id))?;
    }
    let pool = thread_pool(common.jobs)?;
    let scenes = manifest.time("compose_annotate", || {
        pool.install(|| {
            use rayon::prelude::*;
            (0..cfg.scenes.count)
                .into_par_iter()
                .map(|i| build_scene(&library, &grasps, &cfg, i))
                .collect::<Result<Vec<_>>>()
        })
    })?;
    manifest.time("write", || -> Result<()> {
        for data in &scenes {
            let dir = out.join(scene_dir_name(data.meta.scene_index));
            write_dataset(&dir, data)?;
            if data.meta.scene.objects.len() < data.meta.requested_objects {
                eprintln!(
                    "warning: {} placed {} of {} objects",
                    dir.display(),
                    data.meta.scene.objects.len(),
                    data.meta.requested_objects
                );
            }
        }
        Ok(())
    })?;
    for data in &scenes {
        let dir = out.join(scene_dir_name(data.meta.scene_index));
        for f in [META_FILE, TSDF_FILE, LABELS_FILE] {
            manifest.add_output(out, &dir.join(f))?;
        }
    }
    eprintln!("wrote {} scenes to {}", scenes.len(), out.display());
    manifest.write(&out.join(MANIFEST_FILE))
}

fn cmd_eval(
    scenes_dir: &Path,
    library_dir: &Path,
    scores: Option<&Path>,
    detector: &str,
    weights: &str,
    out: &Path,
    common: &Common,
) -> Result<()> {
    let kind: DetectorKind = detector.parse()?;
    let weights = parse_weights(weights)?;
    let cfg = load_config(common, None)?;
    let library = load_library(library_dir)?;
    let grasps = match kind {
        DetectorKind::Oracle => load_scores(scores.unwrap_or(library_dir), &library)?,
        _ => Vec::new(),
    };
    let scenes = scene_dirs(scenes_dir)?
        .iter()
        .map(|d| read_json::<SceneMeta>(&d.join(META_FILE)).map(|m| m.scene))
        .collect::<Result<Vec<_>>>()?;
    let rows = thread_pool(common.jobs)?.install(|| evaluate(&library, &grasps, &scenes, kind, &weights, &cfg))?;
    for r in &rows {
        let pct = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.1}"));
        eprintln!("{:>5} kg  SR {:>5}  CR {:>5}", r.weight_kg, pct(r.sr), pct(r.cr));
    }
    write_metrics_csv(out, &rows)
}

fn cmd_plot(csv: Option<&Path>, labels: Option<&Path>, plane: Option<&str>, out: &Path) -> Result<()> {
    let svg = match (csv, labels) {
        (Some(c), _) => metrics_svg(&read_metrics_csv(c)?),
        (None, Some(l)) => {
            let plane: Plane = plane.unwrap_or_default().parse()?;
            let path = if l.is_dir() { l.join(LABELS_FILE) } else { l.to_path_buf() };
            label_slice_svg(&dataset::read_volume(&path)?, plane)?
        }
        (None, None) => return Err(Error::Input("plot needs --csv or --labels".into())),
    };
    write_atomic(out, svg.as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { mesh, scale, count, seed, out, common } => {
            cmd_sample(&mesh, scale, count, seed, &out, &common)
        }
        Command::RefineScore { candidates, mesh, scale, id, out, common } => {
            cmd_refine_score(&candidates, &mesh, scale, id, &out, &common)
        }
        Command::ComposeAnnotate { library, scores, count, out, common } => {
            cmd_compose_annotate(&library, scores.as_deref(), count, &out, &common)
        }
        Command::Eval { scenes, library, scores, detector, weights, out, common } => {
            cmd_eval(&scenes, &library, scores.as_deref(), &detector, &weights, &out, &common)
        }
        Command::Plot { csv, labels, plane, out } => {
            cmd_plot(csv.as_deref(), labels.as_deref(), plane.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
