//! A self-contained synthetic scene for trying the whole pipeline: an ego
//! camera driving along +x past three boxes, a procedural Gaussian car, an
//! edit list exercising every command, and exact synthetic detections.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde_json::{json, Value};

use crate::dataprep::RngSeed;
use crate::editing::apply_edit;
use crate::evalkit::{EvalConfig, MetricsReport};
use crate::formats::{
    canonical_json, parse_edits, scene_to_json, write_atomic, write_detections, DetectionRecord, EditsFile,
};
use crate::gaussians::{write_asset, Gaussian3D, GaussianCloud};
use crate::geometry::{CameraFrame, CameraIntrinsics, Mat3, Pose, Vec3};
use crate::layout::{Box3D, ClipParams, ObjectClass, ObjectTrack, SceneLayout};
use crate::pipeline::{
    resolve_clip, run_edit, run_eval, run_prep, EditArgs, EvalArgs, PipelineError, PrepArgs,
    DEFAULT_RANDOM_MASK_RATIO,
};

pub const DEMO_FRAMES: u32 = 10;
pub const DEMO_WIDTH: u32 = 960;
pub const DEMO_HEIGHT: u32 = 640;
pub const DEMO_CAR_GAUSSIANS: usize = 2000;

const CAR_DIMS: [f64; 3] = [4.5, 1.9, 1.6];

/// A car-shaped local cloud: body, cabin with windows and four wheels,
/// about `n` Gaussians, centered on its 3σ bounding box.
pub fn procedural_car(seed: RngSeed, n: usize, paint: [f64; 3]) -> GaussianCloud {
    let mut rng = seed.rng();
    // (center, half extents, color, share of the budget)
    let glass = [0.12, 0.16, 0.22];
    let tyre = [0.05, 0.05, 0.05];
    let parts: [([f64; 3], [f64; 3], [f64; 3], f64); 7] = [
        ([0.0, 0.0, 0.55], [2.1, 0.85, 0.3], paint, 0.45),
        ([-0.3, 0.0, 1.1], [1.1, 0.75, 0.25], glass, 0.2),
        ([-0.3, 0.0, 1.37], [1.0, 0.72, 0.03], paint, 0.07),
        ([1.35, 0.82, 0.33], [0.33, 0.1, 0.33], tyre, 0.07),
        ([1.35, -0.82, 0.33], [0.33, 0.1, 0.33], tyre, 0.07),
        ([-1.35, 0.82, 0.33], [0.33, 0.1, 0.33], tyre, 0.07),
        ([-1.35, -0.82, 0.33], [0.33, 0.1, 0.33], tyre, 0.07),
    ];
    let mut gs = Vec::with_capacity(n);
    for (center, half, color, share) in parts {
        let count = ((n as f64) * share).round() as usize;
        for _ in 0..count {
            let p = Vec3::from(std::array::from_fn::<f64, 3, _>(|i| {
                center[i] + half[i] * (2.0 * rng.random::<f64>() - 1.0)
            }));
            let shade = 0.85 + 0.15 * rng.random::<f64>();
            let sigma = 0.04 + 0.04 * rng.random::<f64>();
            gs.push(Gaussian3D::isotropic(p, sigma, 0.9, color.map(|c| c * shade)));
        }
    }
    gs.truncate(n);
    let mut cloud = GaussianCloud::local(gs);
    let extent_center = {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for g in &cloud.gaussians {
            lo = lo.inf(&(g.mean - g.scale * 3.0));
            hi = hi.sup(&(g.mean + g.scale * 3.0));
        }
        (lo + hi) / 2.0
    };
    for g in &mut cloud.gaussians {
        g.mean -= extent_center;
    }
    cloud
}

fn demo_camera(frame: u32) -> CameraFrame {
    // Looking along world +x: image right = world −y, image down = world −z.
    let r = Mat3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let k = CameraIntrinsics::new(1000.0, 1000.0, 480.0, 320.0, DEMO_WIDTH, DEMO_HEIGHT).expect("valid intrinsics");
    let pose = Pose::new(r, Vec3::new(frame as f64, 0.0, 1.5)).expect("rotation is orthonormal");
    CameraFrame::new(k, pose, frame, "front")
}

fn moving_track(id: &str, start: [f64; 2], velocity: [f64; 2], yaw: f64) -> ObjectTrack {
    let dims = Vec3::from(CAR_DIMS);
    ObjectTrack {
        object_id: id.into(),
        class: ObjectClass::Vehicle,
        boxes: (0..DEMO_FRAMES)
            .map(|f| {
                let t = f as f64;
                let c = Vec3::new(start[0] + velocity[0] * t, start[1] + velocity[1] * t, dims.z / 2.0);
                (f, Box3D::new(c, dims, yaw).expect("valid box"))
            })
            .collect(),
    }
}

/// Ego camera moving 1 m/frame along +x; a lead car in lane, a parked car on
/// the right and an oncoming car on the left.
pub fn demo_scene() -> SceneLayout {
    SceneLayout::new(
        DEMO_FRAMES,
        (0..DEMO_FRAMES).map(demo_camera),
        vec![
            moving_track("car_0", [16.0, 0.0], [0.8, 0.0], 0.0),
            moving_track("car_1", [30.0, -4.5], [0.0, 0.0], 0.05),
            moving_track("car_2", [45.0, 4.0], [-1.2, 0.0], std::f64::consts::PI),
        ],
    )
    .expect("demo scene is consistent")
}

/// Rotation by −5°, a one-meter leftward shift, an insertion and a deletion.
pub fn demo_edits_json() -> Value {
    let inserted = moving_track("car_new", [22.0, 3.5], [0.5, 0.0], 0.0);
    json!({"edits": [
        {"name": "rotate", "type": "reposition", "object_id": "car_0", "delta_yaw_deg": -5.0},
        {"name": "shift_left", "type": "reposition", "object_id": "car_0",
         "delta_yaw_deg": 0.0, "delta_t_local": [0.0, 1.0, 0.0]},
        {"name": "insert", "type": "insert", "asset_ref": "sedan", "track": crate::formats::track_to_json(&inserted)},
        {"name": "delete", "type": "delete", "object_id": "car_1"},
    ]})
}

pub fn demo_edits() -> EditsFile {
    parse_edits(&canonical_json(&demo_edits_json()), true).expect("demo edits parse")
}

/// Every edited instance in every clip frame, as a score-1 detection.
pub fn exact_detections(layout: &SceneLayout, edits: &EditsFile) -> Result<Vec<DetectionRecord>, PipelineError> {
    let mut out = Vec::new();
    for e in &edits.edits {
        let clip = resolve_clip(e, layout)?;
        let (edited, id) = apply_edit(layout, &e.command)?;
        let Some(track) = edited.track(&id) else { continue };
        for f in clip.frames() {
            if let Some(b) = track.box_at(f) {
                let mut r = DetectionRecord::from_box(f, track.class, 1.0, b);
                r.clip = Some(e.name.clone());
                r.object_id = Some(id.clone());
                out.push(r);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub dir: PathBuf,
    pub clips: usize,
    pub bundles: Vec<PathBuf>,
    pub report: MetricsReport,
    pub metrics: Value,
}

/// Writes the demo inputs under `dir`, then runs prep, edit and eval on them.
pub fn run_demo(dir: &Path, seed: u64) -> Result<DemoOutcome, PipelineError> {
    let out = |e| PipelineError::Output(e);
    let layout = demo_scene();
    let edits = demo_edits();
    let assets = dir.join("assets");
    let car = procedural_car(RngSeed(seed).derive(1), DEMO_CAR_GAUSSIANS, [0.75, 0.1, 0.08]);
    let sedan = procedural_car(RngSeed(seed).derive(2), DEMO_CAR_GAUSSIANS, [0.1, 0.25, 0.7]);
    write_atomic(&assets.join("car_0.ply"), &write_asset(&car)).map_err(out)?;
    write_atomic(&assets.join("sedan.ply"), &write_asset(&sedan)).map_err(out)?;
    let scene_path = dir.join("scene.json");
    let edits_path = dir.join("edits.json");
    let dets_path = dir.join("detections.jsonl");
    write_atomic(&scene_path, scene_to_json(&layout).as_bytes()).map_err(out)?;
    write_atomic(&edits_path, canonical_json(&demo_edits_json()).as_bytes()).map_err(out)?;
    let dets = exact_detections(&layout, &edits)?;
    write_atomic(&dets_path, write_detections(&dets).as_bytes()).map_err(out)?;

    let manifest = run_prep(&PrepArgs {
        scene: scene_path.clone(),
        camera: "front".into(),
        params: ClipParams::default(),
        seed,
        random_mask_ratio: DEFAULT_RANDOM_MASK_RATIO,
        out: dir.join("manifest.json"),
        strict: true,
    })?;
    let summary = run_edit(&EditArgs {
        scene: scene_path.clone(),
        edits: edits_path.clone(),
        assets,
        clip: None,
        seed,
        out_dir: dir.join("bundles"),
        frames: None,
        augment: false,
        strict: true,
        convention: crate::gaussians::PlyConvention::Auto,
    })?;
    let (report, metrics) = run_eval(&EvalArgs {
        scene: scene_path,
        edits: edits_path,
        detections: dets_path,
        config: EvalConfig::default(),
        out: dir.join("metrics.json"),
        strict: true,
    })?;
    let clips = manifest["clips"].as_array().map_or(0, Vec::len);
    let summary_json = json!({
        "clips_selected": clips,
        "bundles": summary.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "let_map": report.let_map,
        "let_maph": report.let_maph,
        "let_mapl": report.let_mapl,
    });
    write_atomic(&dir.join("demo_summary.json"), canonical_json(&summary_json).as_bytes()).map_err(out)?;
    Ok(DemoOutcome {
        dir: dir.to_path_buf(),
        clips,
        bundles: summary.written,
        report,
        metrics,
    })
}
