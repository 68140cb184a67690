mod common;

use gsedit::layout::{
    neighbors_within, render_depth_boxes, render_edge_mask, select_clips, ClipParams, SceneLayout,
    DEFAULT_EDGE_THICKNESS,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Edge pixels lie on box faces, so depth is present within 2 px.
    #[test]
    fn edges_lie_on_depth_faces(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let layout = common::random_layout(&mut r, 3, 4);
        for f in 0..3 {
            let depth = render_depth_boxes(&layout, f, "front").unwrap();
            let edges = render_edge_mask(&layout, f, "front", DEFAULT_EDGE_THICKNESS).unwrap();
            let (w, h) = (edges.width() as i64, edges.height() as i64);
            for y in 0..h {
                for x in 0..w {
                    if !edges.get(x as u32, y as u32) {
                        continue;
                    }
                    let near_face = (-2..=2).any(|dy: i64| (-2..=2).any(|dx: i64| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0 && ny >= 0 && nx < w && ny < h && depth.get(nx as u32, ny as u32) > 0.0
                    }));
                    prop_assert!(near_face, "edge pixel ({x}, {y}) of frame {f} has no face nearby");
                }
            }
        }
    }

    #[test]
    fn clip_selection_ignores_track_order(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let layout = common::random_layout(&mut r, 12, 6);
        let mut shuffled = layout.tracks.clone();
        shuffled.shuffle(&mut r);
        let permuted = SceneLayout::new(layout.num_frames, layout.cameras.values().cloned(), shuffled).unwrap();
        let params = ClipParams { min_height_px: 20.0, ..ClipParams::default() };
        let a = select_clips(&layout, "front", &params);
        prop_assert_eq!(&a, &select_clips(&permuted, "front", &params));
        prop_assert_eq!(&a, &select_clips(&layout, "front", &params));
    }

    #[test]
    fn neighbor_relation_is_symmetric(seed in any::<u64>(), radius in 0.5f64..20.0) {
        let mut r = common::rng(seed);
        let layout = common::random_layout(&mut r, 4, 5);
        for f in 0..4 {
            let present: Vec<_> = layout.boxes_at(f).map(|(t, _)| t.clone()).collect();
            for a in &present {
                for b in &present {
                    if a.object_id >= b.object_id {
                        continue;
                    }
                    let pair = SceneLayout::new(layout.num_frames, layout.cameras.values().cloned(), vec![a.clone(), b.clone()]).unwrap();
                    prop_assert_eq!(
                        neighbors_within(&pair, f, &a.object_id, radius).unwrap(),
                        neighbors_within(&pair, f, &b.object_id, radius).unwrap()
                    );
                }
            }
        }
    }
}
