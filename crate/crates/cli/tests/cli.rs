//! End-to-end checks of the `gsedit` binary: exit codes, golden renders and
//! the file contracts of each subcommand.
//!
//! Golden files under `tests/golden` come from the naive renderer. Set
//! `GSEDIT_BLESS=1` to regenerate them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsedit::dataprep::RngSeed;
use gsedit::demo::{demo_edits_json, demo_scene, procedural_car};
use gsedit::editing::place_asset;
use gsedit::formats::{canonical_json, read_png_rgb, scene_to_json, write_atomic, write_pfm, DetectionRecord};
use gsedit::gaussians::{load_asset, render_naive, write_asset};
use gsedit::geometry::{CameraFrame, CameraIntrinsics, Mat3, Pose, Vec3};
use gsedit::layout::{render_depth_boxes, render_edge_mask, Box3D, ObjectClass, ObjectTrack, SceneLayout, DEFAULT_EDGE_THICKNESS};
use gsedit::raster::quantize;
use image::{DynamicImage, ImageFormat};
use serde_json::{json, Value};

fn gsedit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsedit"))
}

fn run(args: &[&str]) -> Output {
    gsedit().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn golden_layout() -> SceneLayout {
    let r = Mat3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let k = CameraIntrinsics::new(150.0, 150.0, 80.0, 60.0, 160, 120).unwrap();
    let cam = CameraFrame::new(k, Pose::new(r, Vec3::new(0.0, 0.0, 1.5)).unwrap(), 0, "front");
    let car = Box3D::new(Vec3::new(12.0, 0.5, 0.8), Vec3::new(4.5, 1.9, 1.6), 0.4).unwrap();
    let far = Box3D::new(Vec3::new(25.0, -4.0, 0.8), Vec3::new(4.5, 1.9, 1.6), -0.2).unwrap();
    let track = |id: &str, b| ObjectTrack {
        object_id: id.into(),
        class: ObjectClass::Vehicle,
        boxes: [(0, b)].into(),
    };
    SceneLayout::new(1, [cam], vec![track("car", car), track("far", far)]).unwrap()
}

/// The three render outputs, computed with the naive renderer.
fn naive_render_files(layout: &SceneLayout, asset_bytes: &[u8]) -> [(&'static str, Vec<u8>); 3] {
    let asset = load_asset(asset_bytes).unwrap();
    let cam = layout.camera(0, "front").unwrap();
    let b = layout.track("car").unwrap().box_at(0).unwrap();
    let rgb = quantize(&render_naive(&place_asset(&asset, b).unwrap(), cam).over_white());
    let depth = render_depth_boxes(layout, 0, "front").unwrap();
    let edges = render_edge_mask(layout, 0, "front", DEFAULT_EDGE_THICKNESS).unwrap();
    let png = |img: DynamicImage| {
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    };
    [
        ("gaussian.png", png(DynamicImage::ImageRgb8(rgb))),
        ("depth_boxes.pfm", write_pfm(&depth)),
        ("edge_mask.png", png(DynamicImage::ImageLuma8(edges.to_gray()))),
    ]
}

#[test]
fn render_matches_golden_files() {
    let dir = golden_dir();
    if std::env::var_os("GSEDIT_BLESS").is_some() {
        let layout = golden_layout();
        let asset = write_asset(&procedural_car(RngSeed(5), 400, [0.8, 0.2, 0.1]));
        write_atomic(&dir.join("scene.json"), scene_to_json(&layout).as_bytes()).unwrap();
        write_atomic(&dir.join("car.ply"), &asset).unwrap();
        for (name, bytes) in naive_render_files(&layout, &asset) {
            write_atomic(&dir.join(name), &bytes).unwrap();
        }
    }
    let scene_text = std::fs::read_to_string(dir.join("scene.json")).unwrap();
    let layout = gsedit::formats::parse_scene(&scene_text, true).unwrap().layout;
    let asset = std::fs::read(dir.join("car.ply")).unwrap();
    let expected = naive_render_files(&layout, &asset);

    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "--strict", "render", "--scene", s(&dir.join("scene.json")), "--asset", s(&dir.join("car.ply")),
        "--frame", "0", "--camera", "front", "--object", "car", "--out", s(out.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for (name, bytes) in expected {
        let golden = std::fs::read(dir.join(name)).unwrap();
        assert!(golden == bytes, "{name}: committed golden differs from the naive renderer");
        assert!(std::fs::read(out.path().join(name)).unwrap() == golden, "{name}: render differs from golden");
    }
    let img = read_png_rgb(&out.path().join("gaussian.png")).unwrap();
    assert_eq!(img.dimensions(), (160, 120));
    assert!(img.pixels().any(|p| p.0 != [255; 3]), "asset is visible");
}

#[test]
fn render_errors_map_to_exit_codes() {
    let dir = golden_dir();
    let out = tempfile::tempdir().unwrap();
    let base = |camera: &str, scene: &Path| {
        run(&[
            "render", "--scene", s(scene), "--asset", s(&dir.join("car.ply")), "--frame", "0",
            "--camera", camera, "--out", s(out.path()),
        ])
    };
    let o = base("rear_left", &dir.join("scene.json"));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rear_left"));

    let bad = out.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1,").unwrap();
    assert_eq!(code(&base("front", &bad)), 2);
    assert_eq!(code(&base("front", &out.path().join("missing.json"))), 2);
    assert_eq!(code(&run(&["render", "--frame", "x"])), 2);
}

#[test]
fn unknown_fields_strict_and_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene: Value = serde_json::from_str(&scene_to_json(&demo_scene())).unwrap();
    scene["weather"] = json!("rain");
    let path = dir.path().join("scene.json");
    std::fs::write(&path, canonical_json(&scene)).unwrap();
    let out = dir.path().join("manifest.json");
    let strict = run(&["--strict", "prep", "--scene", s(&path), "--out", s(&out)]);
    assert_eq!(code(&strict), 2);
    assert!(String::from_utf8_lossy(&strict.stderr).contains("weather"));
    let lenient = run(&["prep", "--scene", s(&path), "--out", s(&out)]);
    assert_eq!(code(&lenient), 0);
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("weather"));
}

fn write_demo_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let scene = dir.join("scene.json");
    let edits = dir.join("edits.json");
    let assets = dir.join("assets");
    std::fs::write(&scene, scene_to_json(&demo_scene())).unwrap();
    std::fs::write(&edits, canonical_json(&demo_edits_json())).unwrap();
    let car = write_asset(&procedural_car(RngSeed(1), 300, [0.7, 0.1, 0.1]));
    write_atomic(&assets.join("car_0.ply"), &car).unwrap();
    write_atomic(&assets.join("sedan.ply"), &car).unwrap();
    (scene, edits, assets)
}

#[test]
fn prep_manifest_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, _, _) = write_demo_inputs(dir.path());
    let read = |p: &Path| -> Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };

    let out = dir.path().join("m0.json");
    let o = run(&["prep", "--scene", s(&scene), "--random-mask-ratio", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let m = read(&out);
    assert!(!m["clips"].as_array().unwrap().is_empty());
    assert!(m["random_masks"].as_array().unwrap().is_empty());

    let out = dir.path().join("m1.json");
    assert_eq!(code(&run(&["prep", "--scene", s(&scene), "--random-mask-ratio", "1", "--out", s(&out)])), 0);
    let m = read(&out);
    assert_eq!(m["random_masks"].as_array().unwrap().len(), m["clips"].as_array().unwrap().len());
    assert_eq!(m["params"]["random_mask_ratio"], 1.0);

    let empty = dir.path().join("empty.json");
    let layout = SceneLayout::new(0, [], vec![]).unwrap();
    std::fs::write(&empty, scene_to_json(&layout)).unwrap();
    let out = dir.path().join("m2.json");
    assert_eq!(code(&run(&["prep", "--scene", s(&empty), "--out", s(&out)])), 0);
    assert!(read(&out)["clips"].as_array().unwrap().is_empty());

    assert_eq!(code(&run(&["prep", "--scene", s(&scene), "--random-mask-ratio", "1.5", "--out", s(&out)])), 2);
}

#[test]
fn edit_bundles_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, edits, assets) = write_demo_inputs(dir.path());
    let out = dir.path().join("bundles");
    let args = |clip: &str, out: &Path| {
        run(&[
            "edit", "--scene", s(&scene), "--edits", s(&edits), "--assets", s(&assets), "--seed", "3",
            "--clip", clip, "--out-dir", s(out),
        ])
    };
    assert_eq!(code(&args("rotate", &out)), 0);
    let meta: Value = serde_json::from_slice(&std::fs::read(out.join("rotate/clip_meta.json")).unwrap()).unwrap();
    let yaw = meta["edit"]["delta_yaw"].as_f64().unwrap();
    assert!((yaw - (-5f64).to_radians()).abs() < 1e-15, "{yaw}");
    assert_eq!(meta["stack"]["channel_names"].as_array().unwrap().len(), 14);

    assert_eq!(code(&args("delete", &out)), 0);
    for e in std::fs::read_dir(out.join("delete/gaussian_video")).unwrap() {
        let img = read_png_rgb(&e.unwrap().path()).unwrap();
        assert!(img.as_raw().iter().all(|&v| v == 255));
    }

    assert_eq!(code(&args("no_such_edit", &out)), 2);

    // Editing an object without an asset fails the clip and the run.
    std::fs::remove_file(assets.join("car_0.ply")).unwrap();
    let o = args("rotate", &dir.path().join("again"));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("car_0"));
}

#[test]
fn zero_delta_reposition_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, _, assets) = write_demo_inputs(dir.path());
    let edits = dir.path().join("zero.json");
    let doc = json!({"edits": [{"name": "still", "type": "reposition", "object_id": "car_0", "delta_yaw_deg": 0.0}]});
    std::fs::write(&edits, canonical_json(&doc)).unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "edit", "--scene", s(&scene), "--edits", s(&edits), "--assets", s(&assets), "--seed", "9",
            "--out-dir", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut files = Vec::new();
        for sub in ["", "gaussian_video", "masked_video", "inpaint_masks", "edge_masks", "depth_boxes"] {
            let d = out.join("still").join(sub);
            let mut names: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
            names.sort();
            for p in names {
                files.push((p.strip_prefix(&out).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
        files
    };
    let (a, b) = (go("a"), go("b"));
    assert!(a.len() > 10);
    assert!(a == b);
}

/// Edits file with one reposition and detections for its edited box,
/// shifted along the line of sight by `frac` of the range.
fn eval_fixture(dir: &Path, frac: f64) -> (PathBuf, PathBuf, PathBuf) {
    let (scene, _, _) = write_demo_inputs(dir);
    let edits = dir.join("one.json");
    let doc = json!({"edits": [{"name": "rotate", "type": "reposition", "object_id": "car_0", "delta_yaw_deg": -5.0}]});
    std::fs::write(&edits, canonical_json(&doc)).unwrap();
    let parsed = gsedit::formats::parse_edits(&canonical_json(&doc), true).unwrap();
    let layout = demo_scene();
    let (edited, id) = gsedit::editing::apply_edit(&layout, &parsed.edits[0].command).unwrap();
    let mut lines = String::new();
    for f in 0..10 {
        let b = *edited.track(&id).unwrap().box_at(f).unwrap();
        let cam = edited.camera(f, "front").unwrap().center();
        let los = b.center - cam;
        let shifted = Box3D { center: b.center + los * frac, ..b };
        let rec = DetectionRecord::from_box(f, ObjectClass::Vehicle, 0.9, &shifted);
        lines.push_str(&serde_json::to_string(&rec).unwrap());
        lines.push('\n');
    }
    let dets = dir.join("dets.jsonl");
    std::fs::write(&dets, lines).unwrap();
    (scene, edits, dets)
}

#[test]
fn eval_tolerance_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, edits, dets) = eval_fixture(dir.path(), 0.06);
    let read = |p: &Path| -> Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };
    let eval = |extra: &[&str], out: &Path| {
        let mut args = vec!["eval", "--scene", s(&scene), "--edits", s(&edits), "--detections", s(&dets), "--out", s(out)];
        args.extend_from_slice(extra);
        run(&args)
    };
    let default_out = dir.path().join("default.json");
    assert_eq!(code(&eval(&[], &default_out)), 0);
    let m = read(&default_out);
    assert_eq!(m["config"]["lon_tolerance_frac"], 0.05);
    assert_eq!(m["let_map"], 0.0);
    assert_eq!(m["counts"]["fn"], 10);

    let wide_out = dir.path().join("wide.json");
    assert_eq!(code(&eval(&["--tol", "0.10"], &wide_out)), 0);
    let m = read(&wide_out);
    assert_eq!(m["config"]["lon_tolerance_frac"], 0.1);
    assert_eq!(m["counts"]["tp"], 10);
    assert_eq!(m["let_map"], 1.0);
    assert!(m["let_mapl"].as_f64().unwrap() < m["let_maph"].as_f64().unwrap());
}

#[test]
fn eval_exact_detections_and_no_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, edits, dets) = eval_fixture(dir.path(), 0.0);
    let out = dir.path().join("m.json");
    let o = run(&["eval", "--scene", s(&scene), "--edits", s(&edits), "--detections", s(&dets), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let m: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!((m["let_map"].as_f64(), m["let_maph"].as_f64(), m["let_mapl"].as_f64()), (Some(1.0), Some(1.0), Some(1.0)));

    // A deletion leaves no edited instance to score.
    let del = dir.path().join("del.json");
    let doc = json!({"edits": [{"name": "gone", "type": "delete", "object_id": "car_1"}]});
    std::fs::write(&del, canonical_json(&doc)).unwrap();
    let empty = dir.path().join("none.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["eval", "--scene", s(&scene), "--edits", s(&del), "--detections", s(&empty), "--out", s(&out)]);
    assert_eq!(code(&o), 4);

    std::fs::write(&empty, "{\"frame\": 0,\n").unwrap();
    let o = run(&["eval", "--scene", s(&scene), "--edits", s(&edits), "--detections", s(&empty), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}
