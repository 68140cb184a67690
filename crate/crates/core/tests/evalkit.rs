mod common;

use gsedit::evalkit::{compute_metrics, iou3d, let_align, let_match, Detection, EvalConfig, GroundTruth, MatchResult};
use gsedit::geometry::Vec3;
use gsedit::layout::{Box3D, ObjectClass};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_box(r: &mut ChaCha8Rng) -> Box3D {
    Box3D::new(
        Vec3::new(r.random_range(8.0..60.0), r.random_range(-15.0..15.0), r.random_range(0.5..1.5)),
        Vec3::new(r.random_range(3.5..5.5), r.random_range(1.6..2.2), r.random_range(1.3..2.0)),
        r.random_range(-3.1..3.1),
    )
    .unwrap()
}

type Frame = (Vec<Detection>, Vec<GroundTruth>);

/// Frames of ground truth with noisy, partly missing detections and clutter,
/// over two classes.
fn random_frames(r: &mut ChaCha8Rng) -> Vec<Frame> {
    (0..r.random_range(1..5))
        .map(|_| {
            let gts: Vec<GroundTruth> = (0..r.random_range(0..5))
                .map(|i| GroundTruth {
                    object_id: format!("o{i}"),
                    bbox: random_box(r),
                    class: if r.random::<f64>() < 0.7 { ObjectClass::Vehicle } else { ObjectClass::Cyclist },
                })
                .collect();
            let mut dets = Vec::new();
            for g in &gts {
                if r.random::<f64>() < 0.8 {
                    let range = g.bbox.center.norm();
                    let los = g.bbox.center / range;
                    let b = Box3D::new(
                        g.bbox.center + los * (r.random_range(-0.07..0.07) * range) + Vec3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), 0.0),
                        g.bbox.dims,
                        g.bbox.yaw + r.random_range(-0.8..0.8),
                    )
                    .unwrap();
                    dets.push(Detection { bbox: b, score: r.random(), class: g.class });
                }
            }
            for _ in 0..r.random_range(0..3) {
                dets.push(Detection { bbox: random_box(r), score: r.random(), class: ObjectClass::Vehicle });
            }
            (dets, gts)
        })
        .collect()
}

fn evaluate(frames: &[Frame]) -> Option<[f64; 3]> {
    let cfg = EvalConfig::default();
    let mut res = MatchResult::default();
    for (d, g) in frames {
        res.extend(let_match(d, g, &cfg, &Vec3::zeros()).unwrap());
    }
    compute_metrics(&[("clip".into(), res)]).ok().map(|m| [m.let_map, m.let_maph, m.let_mapl])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn weighted_metrics_are_ordered(seed in any::<u64>()) {
        let frames = random_frames(&mut common::rng(seed));
        if let Some([map, maph, mapl]) = evaluate(&frames) {
            prop_assert!(mapl <= maph && maph <= map && (0.0..=1.0).contains(&map));
        }
    }

    #[test]
    fn detection_order_does_not_matter(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let frames = random_frames(&mut r);
        let mut shuffled = frames.clone();
        for (d, g) in &mut shuffled {
            d.shuffle(&mut r);
            g.shuffle(&mut r);
        }
        prop_assert_eq!(evaluate(&frames), evaluate(&shuffled));
    }

    #[test]
    fn monotone_score_maps_do_not_matter(seed in any::<u64>()) {
        let frames = random_frames(&mut common::rng(seed));
        let mut mapped = frames.clone();
        for (d, _) in &mut mapped {
            for x in d.iter_mut() {
                x.score = (3.0 * x.score).exp() * 0.1 + 2.0;
            }
        }
        prop_assert_eq!(evaluate(&frames), evaluate(&mapped));
    }

    #[test]
    fn iou_is_symmetric_and_half_turn_invariant(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let a = random_box(&mut r);
        let b = Box3D::new(a.center + Vec3::new(r.random_range(-3.0..3.0), r.random_range(-2.0..2.0), 0.2), a.dims * 0.9, r.random_range(-3.1..3.1)).unwrap();
        let v = iou3d(&a, &b);
        prop_assert!((v - iou3d(&b, &a)).abs() < 1e-12);
        let turn = |x: &Box3D| Box3D::new(x.center, x.dims, x.yaw + std::f64::consts::PI).unwrap();
        prop_assert!((v - iou3d(&turn(&a), &turn(&b))).abs() < 1e-12);
    }

    #[test]
    fn alignment_is_idempotent(seed in any::<u64>(), cam in prop::array::uniform3(-5.0f64..5.0)) {
        let mut r = common::rng(seed);
        let (d, g) = (random_box(&mut r), random_box(&mut r));
        let cam = Vec3::from(cam);
        let once = let_align(&d, &g, &cam).unwrap();
        let twice = let_align(&once.aligned, &g, &cam).unwrap();
        prop_assert!(twice.lon_error.abs() < 1e-9);
        prop_assert!((once.aligned.center - twice.aligned.center).norm() < 1e-9);
    }
}
