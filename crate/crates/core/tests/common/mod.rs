//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use gsedit::gaussians::{Gaussian3D, GaussianCloud};
use gsedit::geometry::{CameraFrame, CameraIntrinsics, Mat3, Pose, Vec3};
use gsedit::layout::{Box3D, ObjectClass, ObjectTrack, SceneLayout};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Camera at `(x, 0, 1.5)` looking along world +x; image right is world −y.
pub fn forward_camera(frame: u32, x: f64, width: u32, height: u32, focal: f64) -> CameraFrame {
    let r = Mat3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let k = CameraIntrinsics::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height).unwrap();
    CameraFrame::new(k, Pose::new(r, Vec3::new(x, 0.0, 1.5)).unwrap(), frame, "front")
}

pub fn random_rotation(r: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(
        r.random_range(-3.1..3.1),
        r.random_range(-1.5..1.5),
        r.random_range(-3.1..3.1),
    )
}

/// `n` Gaussians scattered in front of a camera at the origin looking down +z.
pub fn random_cloud(r: &mut ChaCha8Rng, n: usize) -> GaussianCloud {
    GaussianCloud::world(
        (0..n)
            .map(|_| {
                let z = r.random_range(1.0..15.0);
                Gaussian3D {
                    mean: Vec3::new(r.random_range(-0.5..0.5) * z, r.random_range(-0.4..0.4) * z, z),
                    rotation: random_rotation(r),
                    scale: Vec3::new(r.random_range(0.01..0.4), r.random_range(0.01..0.4), r.random_range(0.01..0.4)),
                    opacity: r.random_range(0.02..1.0),
                    color: [r.random(), r.random(), r.random()],
                }
            })
            .collect(),
    )
}

pub fn axis_camera(width: u32, height: u32, focal: f64) -> CameraFrame {
    let k = CameraIntrinsics::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height).unwrap();
    CameraFrame::new(k, Pose::identity(), 0, "front")
}

pub fn car(x: f64, y: f64, yaw: f64) -> Box3D {
    Box3D::new(Vec3::new(x, y, 0.8), Vec3::new(4.5, 1.9, 1.6), yaw).unwrap()
}

pub fn track(id: &str, boxes: impl IntoIterator<Item = (u32, Box3D)>) -> ObjectTrack {
    ObjectTrack {
        object_id: id.into(),
        class: ObjectClass::Vehicle,
        boxes: boxes.into_iter().collect(),
    }
}

/// `frames` frames of a forward camera driving 1 m/frame, with objects
/// scattered ahead that drift slowly.
pub fn random_layout(r: &mut ChaCha8Rng, frames: u32, objects: usize) -> SceneLayout {
    let cams: Vec<CameraFrame> = (0..frames).map(|f| forward_camera(f, f as f64, 320, 240, 300.0)).collect();
    let tracks = (0..objects)
        .map(|i| {
            let s = r.random_range(0..frames);
            let e = r.random_range(s + 1..=frames);
            let (x, y, yaw) = (r.random_range(12.0..50.0), r.random_range(-8.0..8.0), r.random_range(-3.1..3.1));
            let (vx, vy) = (r.random_range(0.0..1.5), r.random_range(-0.2..0.2));
            track(&format!("obj_{i}"), (s..e).map(|f| (f, car(x + vx * f as f64, y + vy * f as f64, yaw))))
        })
        .collect();
    SceneLayout::new(frames, cams, tracks).unwrap()
}
