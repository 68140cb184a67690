//! Batch entry points behind the command-line subcommands.
//!
//! Each `run_*` function reads its inputs from disk, does its work inside a
//! worker pool sized by `GSEDIT_THREADS` (all cores when unset) and writes
//! every output file atomically. Outputs do not depend on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dataprep::{
    pick_reference_frame, random_object_free_mask, AugmentParams, DataprepError, RngSeed, DEFAULT_MIN_PAD_PX,
    DEFAULT_PAD_FRAC,
};
use crate::editing::{
    apply_edit, assemble_channel_stack, build_bundle, place_asset, AssetStore, BundleOptions, ClipSpec, EditError, FrameSource, SyntheticBackground,
};
use crate::evalkit::{compute_metrics, let_match, Detection, EvalConfig, EvalError, GroundTruth, MatchResult, MetricsReport};
use crate::formats::{
    canonical_json, parse_detections, parse_edits, parse_scene, read_file, read_png_rgb, write_atomic, write_bundle,
    write_png_gray, write_png_rgb, write_pfm, EditEntry, FormatError,
};
use crate::gaussians::{load_asset_with, render, GaussianCloud, PlyConvention, PlyError};
use crate::geometry::CameraFrame;
use crate::layout::{render_depth_boxes, render_edge_mask, select_clips, ClipParams, LayoutError, SceneLayout, DEFAULT_EDGE_THICKNESS};
use crate::raster::{quantize, solid_rgb, to_float};

pub const THREADS_ENV: &str = "GSEDIT_THREADS";
/// Share of prepared clips that also get a random object-free mask entry.
pub const DEFAULT_RANDOM_MASK_RATIO: f64 = 0.2;
pub const DEFAULT_CLIP_FRAMES: u32 = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {source}")]
    Asset {
        path: PathBuf,
        #[source]
        source: PlyError,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{failed} of {total} clips failed")]
    ClipsFailed { failed: usize, total: usize },
    #[error(transparent)]
    Output(FormatError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    /// 2 for unreadable inputs, 3 for render and edit failures, 4 when
    /// evaluation has no ground truth, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Parse { .. } | PipelineError::Asset { .. } | PipelineError::Usage(_) => 2,
            PipelineError::Layout(_) | PipelineError::Edit(_) | PipelineError::ClipsFailed { .. } => 3,
            PipelineError::Eval(EvalError::NoGroundTruth) => 4,
            PipelineError::Eval(_) => 3,
            PipelineError::Output(_) | PipelineError::Pool(_) => 1,
        }
    }
}

fn parse_err(path: &Path) -> impl FnOnce(FormatError) -> PipelineError + '_ {
    move |source| PipelineError::Parse {
        path: path.to_path_buf(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    let bytes = read_file(path).map_err(parse_err(path))?;
    String::from_utf8(bytes).map_err(|_| PipelineError::Parse {
        path: path.to_path_buf(),
        source: FormatError::Schema("file is not UTF-8".into()),
    })
}

/// Runs `f` on a pool of `GSEDIT_THREADS` workers, or on the global pool when
/// the variable is unset.
pub fn with_threads<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| PipelineError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

pub fn load_scene(path: &Path, strict: bool) -> Result<SceneLayout, PipelineError> {
    Ok(parse_scene(&read_text(path)?, strict).map_err(parse_err(path))?.layout)
}

pub fn load_asset_file(path: &Path, convention: PlyConvention) -> Result<GaussianCloud, PipelineError> {
    let bytes = read_file(path).map_err(parse_err(path))?;
    load_asset_with(&bytes, convention).map_err(|source| PipelineError::Asset {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `<name>.ply` assets and optional `<name>.ref.png` reference images.
pub fn load_asset_store(dir: &Path, convention: PlyConvention) -> Result<AssetStore, PipelineError> {
    let mut store = AssetStore::default();
    let entries = std::fs::read_dir(dir).map_err(|source| PipelineError::Parse {
        path: dir.to_path_buf(),
        source: FormatError::Io {
            path: dir.to_path_buf(),
            source,
        },
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(key) = name.strip_suffix(".ref.png") {
            store
                .references
                .insert(key.to_string(), read_png_rgb(&p).map_err(parse_err(&p))?);
        } else if let Some(key) = name.strip_suffix(".ply") {
            store.assets.insert(key.to_string(), load_asset_file(&p, convention)?);
        }
    }
    Ok(store)
}

/// Recorded frames stored as `<dir>/<camera_id>/<frame:06>.png`.
pub struct PngFrames {
    pub dir: PathBuf,
}

impl FrameSource for PngFrames {
    fn frame(&self, frame: u32, cam: &CameraFrame) -> Result<image::Rgb32FImage, EditError> {
        let path = self.dir.join(&cam.camera_id).join(format!("{frame:06}.png"));
        let img = read_png_rgb(&path).map_err(|e| EditError::Source {
            frame,
            message: e.to_string(),
        })?;
        if img.dimensions() != (cam.width(), cam.height()) {
            return Err(EditError::Source {
                frame,
                message: format!(
                    "{} is {:?}, camera expects {:?}",
                    path.display(),
                    img.dimensions(),
                    (cam.width(), cam.height())
                ),
            });
        }
        Ok(to_float(&img))
    }
}

#[derive(Debug, Clone)]
pub struct RenderArgs {
    pub scene: PathBuf,
    pub asset: PathBuf,
    pub frame: u32,
    pub camera: String,
    /// Object whose box receives the asset; the first object present in the
    /// frame when `None`.
    pub object: Option<String>,
    pub out: PathBuf,
    pub strict: bool,
    pub convention: PlyConvention,
}

/// Writes `gaussian.png` (asset over white), `depth_boxes.pfm` and
/// `edge_mask.png` for one frame. Returns the written paths.
pub fn run_render(args: &RenderArgs) -> Result<Vec<PathBuf>, PipelineError> {
    let layout = load_scene(&args.scene, args.strict)?;
    let asset = load_asset_file(&args.asset, args.convention)?;
    let cam = layout.camera(args.frame, &args.camera)?;
    let target = match &args.object {
        Some(id) => {
            let t = layout.track(id).ok_or_else(|| EditError::UnknownObject(id.clone()))?;
            Some(*t.box_at(args.frame).ok_or_else(|| LayoutError::ObjectAbsent {
                object: id.clone(),
                frame: args.frame,
            })?)
        }
        None => layout.boxes_at(args.frame).next().map(|(_, b)| *b),
    };
    let (gaussian, depth, edges) = with_threads(|| -> Result<_, PipelineError> {
        let gaussian = match &target {
            Some(b) => quantize(&render(&place_asset(&asset, b)?, cam).over_white()),
            None => solid_rgb(cam.width(), cam.height(), 255),
        };
        let depth = render_depth_boxes(&layout, args.frame, &args.camera)?;
        let edges = render_edge_mask(&layout, args.frame, &args.camera, DEFAULT_EDGE_THICKNESS)?;
        Ok((gaussian, depth, edges))
    })??;
    let paths = [
        args.out.join("gaussian.png"),
        args.out.join("depth_boxes.pfm"),
        args.out.join("edge_mask.png"),
    ];
    write_png_rgb(&paths[0], &gaussian).map_err(PipelineError::Output)?;
    write_atomic(&paths[1], &write_pfm(&depth)).map_err(PipelineError::Output)?;
    write_png_gray(&paths[2], &edges.to_gray()).map_err(PipelineError::Output)?;
    Ok(paths.to_vec())
}

/// Resolves an edit's clip against the scene: start 0, up to 10 frames, the
/// first camera id in the scene.
pub fn resolve_clip(entry: &EditEntry, layout: &SceneLayout) -> Result<ClipSpec, PipelineError> {
    let start = entry.clip.start_frame.unwrap_or(0);
    let available = layout.num_frames.saturating_sub(start);
    let num_frames = entry.clip.num_frames.unwrap_or(DEFAULT_CLIP_FRAMES.min(available));
    let camera_id = match &entry.clip.camera_id {
        Some(c) => c.clone(),
        None => layout
            .cameras
            .keys()
            .next()
            .map(|(_, id)| id.clone())
            .ok_or_else(|| PipelineError::Usage("scene has no cameras".into()))?,
    };
    Ok(ClipSpec {
        start_frame: start,
        num_frames,
        camera_id,
    })
}

#[derive(Debug, Clone)]
pub struct EditArgs {
    pub scene: PathBuf,
    pub edits: PathBuf,
    pub assets: PathBuf,
    /// Only the edit with this name.
    pub clip: Option<String>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Recorded frames; synthetic backgrounds seeded by `seed` when `None`.
    pub frames: Option<PathBuf>,
    pub augment: bool,
    pub strict: bool,
    pub convention: PlyConvention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditSummary {
    pub written: Vec<PathBuf>,
    pub failed: Vec<(String, String)>,
}

pub fn run_edit(args: &EditArgs) -> Result<EditSummary, PipelineError> {
    let layout = load_scene(&args.scene, args.strict)?;
    let edits = parse_edits(&read_text(&args.edits)?, args.strict).map_err(parse_err(&args.edits))?;
    let assets = load_asset_store(&args.assets, args.convention)?;
    let selected: Vec<(usize, &EditEntry)> = edits
        .edits
        .iter()
        .enumerate()
        .filter(|(_, e)| args.clip.as_ref().is_none_or(|c| &e.name == c))
        .collect();
    if let (Some(c), true) = (&args.clip, selected.is_empty()) {
        return Err(PipelineError::Usage(format!("no edit named '{c}'")));
    }
    let seed = RngSeed(args.seed);
    let synthetic = SyntheticBackground { seed };
    let recorded = args.frames.as_ref().map(|d| PngFrames { dir: d.clone() });
    let source: &dyn FrameSource = match &recorded {
        Some(r) => r,
        None => &synthetic,
    };
    let results: Vec<(String, Result<PathBuf, String>)> = with_threads(|| {
        selected
            .par_iter()
            .map(|&(i, entry)| {
                let out = (|| -> Result<PathBuf, PipelineError> {
                    let clip = resolve_clip(entry, &layout)?;
                    let opts = BundleOptions {
                        augment: args
                            .augment
                            .then(|| (AugmentParams::default(), seed.derive(0xA06_0000 + i as u64))),
                        ..BundleOptions::default()
                    };
                    let bundle = build_bundle(&layout, &entry.command, &clip, &assets, source, &opts)?;
                    let stack = assemble_channel_stack(&bundle)?;
                    let dir = args.out_dir.join(&entry.name);
                    write_bundle(&dir, &bundle, &stack).map_err(PipelineError::Output)?;
                    Ok(dir)
                })();
                (entry.name.clone(), out.map_err(|e| e.to_string()))
            })
            .collect()
    })?;
    let mut summary = EditSummary {
        written: Vec::new(),
        failed: Vec::new(),
    };
    for (name, r) in results {
        match r {
            Ok(dir) => summary.written.push(dir),
            Err(msg) => {
                log::error!("clip '{name}' failed: {msg}");
                summary.failed.push((name, msg));
            }
        }
    }
    if !summary.failed.is_empty() {
        return Err(PipelineError::ClipsFailed {
            failed: summary.failed.len(),
            total: selected.len(),
        });
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct PrepArgs {
    pub scene: PathBuf,
    pub camera: String,
    pub params: ClipParams,
    pub seed: u64,
    pub random_mask_ratio: f64,
    pub out: PathBuf,
    pub strict: bool,
}

/// Selects clips and writes a JSON manifest with each clip's reference frame
/// and mask parameters, plus random object-free mask entries for roughly
/// `random_mask_ratio` of the clips.
pub fn run_prep(args: &PrepArgs) -> Result<Value, PipelineError> {
    if !(0.0..=1.0).contains(&args.random_mask_ratio) {
        return Err(PipelineError::Usage("random mask ratio must lie in [0, 1]".into()));
    }
    let layout = load_scene(&args.scene, args.strict)?;
    let seed = RngSeed(args.seed);
    let clips = with_threads(|| select_clips(&layout, &args.camera, &args.params))?;
    let mut clip_entries = Vec::with_capacity(clips.len());
    let mut random_masks = Vec::new();
    for (i, c) in clips.iter().enumerate() {
        let frames: Vec<u32> = (c.start_frame..c.start_frame + args.params.n).collect();
        clip_entries.push(json!({
            "object_id": c.object_id,
            "start_frame": c.start_frame,
            "num_frames": args.params.n,
            "target_frame": c.start_frame,
            "reference_frame": pick_reference_frame(&frames, c.start_frame),
        }));
        let mut rng = seed.derive(i as u64).rng();
        if args.random_mask_ratio > 0.0 && rng.random::<f64>() < args.random_mask_ratio {
            let frame = frames[rng.random_range(0..frames.len())];
            match random_object_free_mask(&layout, frame, &args.camera, seed.derive(0x5EED_0000 + i as u64)) {
                Ok((_, r)) => random_masks.push(json!({
                    "clip_index": i,
                    "frame": frame,
                    "camera_id": args.camera,
                    "rect": [r.x0, r.y0, r.x1, r.y1],
                })),
                Err(DataprepError::NoFreeRegion(n)) => {
                    log::warn!("clip {i}: no object-free region in frame {frame} after {n} attempts")
                }
                Err(e) => return Err(EditError::from(e).into()),
            }
        }
    }
    let manifest = json!({
        "camera_id": args.camera,
        "params": {
            "n": args.params.n,
            "min_height_px": args.params.min_height_px,
            "max_neighbors": args.params.max_neighbors,
            "neighbor_radius_m": args.params.neighbor_radius_m,
            "pad_frac": DEFAULT_PAD_FRAC,
            "min_pad_px": DEFAULT_MIN_PAD_PX,
            "random_mask_ratio": args.random_mask_ratio,
            "seed": args.seed,
        },
        "clips": clip_entries,
        "random_masks": random_masks,
    });
    write_atomic(&args.out, canonical_json(&manifest).as_bytes()).map_err(PipelineError::Output)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub scene: PathBuf,
    pub edits: PathBuf,
    pub detections: PathBuf,
    pub config: EvalConfig,
    pub out: PathBuf,
    pub strict: bool,
}

/// Matches detections against the edited instances of every edit's clip and
/// writes the metrics report with the configuration echoed under `config`.
///
/// Detections name their clip by edit name; the field may be omitted when
/// the edit list has a single entry. With `restrict_to_edited`, detections
/// labelled with another object's id are dropped and only the edited object
/// is ground truth; otherwise every object in the edited layout is.
pub fn run_eval(args: &EvalArgs) -> Result<(MetricsReport, Value), PipelineError> {
    let layout = load_scene(&args.scene, args.strict)?;
    let edits = parse_edits(&read_text(&args.edits)?, args.strict).map_err(parse_err(&args.edits))?;
    let records = parse_detections(&read_text(&args.detections)?).map_err(parse_err(&args.detections))?;

    let mut by_clip: BTreeMap<&str, Vec<&crate::formats::DetectionRecord>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let name = match (&r.clip, edits.edits.as_slice()) {
            (Some(c), _) => c.as_str(),
            (None, [only]) => only.name.as_str(),
            (None, _) => {
                return Err(parse_err(&args.detections)(FormatError::Line {
                    line: i + 1,
                    message: "detection has no 'clip' and the edit list has several entries".into(),
                }))
            }
        };
        if !edits.edits.iter().any(|e| e.name == name) {
            return Err(parse_err(&args.detections)(FormatError::Schema(format!(
                "detection {} refers to unknown clip '{name}'",
                i + 1
            ))));
        }
        by_clip.entry(name).or_default().push(r);
    }

    let cfg = args.config;
    let clips = with_threads(|| {
        edits
            .edits
            .par_iter()
            .map(|entry| -> Result<(String, MatchResult), PipelineError> {
                let clip = resolve_clip(entry, &layout)?;
                let (edited, object_id) = apply_edit(&layout, &entry.command)?;
                let dets = by_clip.get(entry.name.as_str()).map(Vec::as_slice).unwrap_or_default();
                let mut result = MatchResult::default();
                for f in clip.frames() {
                    let cam = edited.camera(f, &clip.camera_id)?;
                    let gts: Vec<GroundTruth> = edited
                        .boxes_at(f)
                        .filter(|(t, _)| !cfg.restrict_to_edited || t.object_id == object_id)
                        .map(|(t, b)| GroundTruth {
                            object_id: t.object_id.clone(),
                            bbox: *b,
                            class: t.class,
                        })
                        .collect();
                    let frame_dets: Vec<Detection> = dets
                        .iter()
                        .filter(|r| r.frame == f)
                        .filter(|r| !cfg.restrict_to_edited || r.object_id.as_ref().is_none_or(|id| id == &object_id))
                        .map(|r| r.detection().expect("validated on parse"))
                        .collect();
                    result.extend(let_match(&frame_dets, &gts, &cfg, &cam.center())?);
                }
                let outside = dets.iter().filter(|r| !clip.frames().contains(&r.frame)).count();
                if outside > 0 {
                    log::warn!("clip '{}': ignoring {outside} detections outside its frames", entry.name);
                }
                Ok((entry.name.clone(), result))
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    let report = compute_metrics(&clips)?;
    let mut out = serde_json::to_value(&report).expect("report serializes");
    out["config"] = serde_json::to_value(cfg).expect("config serializes");
    write_atomic(&args.out, canonical_json(&out).as_bytes()).map_err(PipelineError::Output)?;
    Ok((report, out))
}
