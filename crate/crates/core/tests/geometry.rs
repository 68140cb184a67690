mod common;

use gsedit::geometry::{compose, orthonormal_deviation, world_to_camera, CameraFrame, CameraIntrinsics, Pose, Vec3};
use proptest::prelude::*;

fn camera(seed: u64) -> CameraFrame {
    let mut r = common::rng(seed);
    let rot = common::random_rotation(&mut r);
    let t = Vec3::new(r_f(&mut r, 100.0), r_f(&mut r, 100.0), r_f(&mut r, 10.0));
    let k = CameraIntrinsics::new(900.0, 880.0, 480.0, 320.0, 960, 640).unwrap();
    CameraFrame::new(k, Pose::new(*rot.to_rotation_matrix().matrix(), t).unwrap(), 0, "front")
}

fn r_f(r: &mut rand_chacha::ChaCha8Rng, half: f64) -> f64 {
    use rand::Rng;
    r.random_range(-half..half)
}

proptest! {
    #[test]
    fn project_then_unproject_is_identity(
        seed in any::<u64>(),
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in 1.0f64..200.0,
    ) {
        let cam = camera(seed);
        let world = cam.camera_to_world(&Vec3::new(x * z, y * z, z));
        let p = cam.project(&world).unwrap();
        let back = cam.unproject(p.u, p.v, p.depth);
        prop_assert!((back - world).norm() < 1e-6, "{}", (back - world).norm());
    }

    #[test]
    fn world_to_camera_preserves_distance(
        seed in any::<u64>(),
        a in prop::array::uniform3(-500.0f64..500.0),
        b in prop::array::uniform3(-500.0f64..500.0),
    ) {
        let cam = camera(seed);
        let (a, b) = (Vec3::from(a), Vec3::from(b));
        let d = (world_to_camera(&a, &cam) - world_to_camera(&b, &cam)).norm();
        prop_assert!((d - (a - b).norm()).abs() < 1e-9);
    }
}

#[test]
fn chained_composition_stays_orthonormal() {
    let mut r = common::rng(3);
    let mut acc = Pose::identity();
    for _ in 0..100 {
        let q = common::random_rotation(&mut r);
        let step = Pose::new(*q.to_rotation_matrix().matrix(), Vec3::new(1.0, -2.0, 0.5)).unwrap();
        acc = compose(&step, &acc);
        assert!(orthonormal_deviation(&acc.rotation) < 1e-9);
    }
    assert!(Pose::new(acc.rotation, acc.translation).is_ok());
}
