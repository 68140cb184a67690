//! Depth-aware box images and wireframe edge masks.

use super::{box_corners, LayoutError, SceneLayout, BOX_EDGES, BOX_FACES};
use crate::geometry::{clip_segment_near, CameraFrame, Projection, NEAR_PLANE};
use crate::raster::{DepthImage, Mask};

pub const DEFAULT_EDGE_THICKNESS: f64 = 2.0;

/// Rasterizes every face of every box present in `frame` with a nearest-wins
/// z-buffer. Each face is split into two triangles; depth is interpolated
/// perspective-correctly (linear in 1/z across the screen), which is exact
/// for planar faces. Faces with a corner at or behind the near plane are
/// skipped.
pub fn render_depth_boxes(
    layout: &SceneLayout,
    frame: u32,
    camera_id: &str,
) -> Result<DepthImage, LayoutError> {
    let cam = layout.camera(frame, camera_id)?;
    let mut img = DepthImage::new(cam.width(), cam.height());
    for (_, b) in layout.boxes_at(frame) {
        let corners = box_corners(b).map(|c| cam.world_to_camera(&c));
        for face in BOX_FACES {
            if face.iter().any(|&i| corners[i].z <= NEAR_PLANE) {
                continue;
            }
            let p = face.map(|i| cam.project_camera_point(&corners[i]));
            fill_triangle(&mut img, p[0], p[1], p[2]);
            fill_triangle(&mut img, p[0], p[2], p[3]);
        }
    }
    Ok(img)
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

fn fill_triangle(img: &mut DepthImage, a: Projection, b: Projection, c: Projection) {
    let (pa, pb, pc) = ((a.u, a.v), (b.u, b.v), (c.u, c.v));
    let area = edge(pa, pb, pc);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = a.u.min(b.u).min(c.u).ceil().max(0.0);
    let x1 = a.u.max(b.u).max(c.u).floor().min(w - 1.0);
    let y0 = a.v.min(b.v).min(c.v).ceil().max(0.0);
    let y1 = a.v.max(b.v).max(c.v).floor().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let inv = [1.0 / a.depth, 1.0 / b.depth, 1.0 / c.depth];
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let p = (x as f64, y as f64);
            let wa = edge(pb, pc, p) / area;
            let wb = edge(pc, pa, p) / area;
            let wc = edge(pa, pb, p) / area;
            if wa < 0.0 || wb < 0.0 || wc < 0.0 {
                continue;
            }
            let depth = (1.0 / (wa * inv[0] + wb * inv[1] + wc * inv[2])) as f32;
            let cur = img.get(x, y);
            if cur == 0.0 || depth < cur {
                img.set(x, y, depth);
            }
        }
    }
}

/// Draws the 12 edges of every box present in `frame`. Pixels whose centers
/// lie within `thickness / 2` of a projected edge are set. Edges crossing the
/// near plane are clipped to it before projection.
pub fn render_edge_mask(
    layout: &SceneLayout,
    frame: u32,
    camera_id: &str,
    thickness: f64,
) -> Result<Mask, LayoutError> {
    let cam = layout.camera(frame, camera_id)?;
    let mut mask = Mask::new(cam.width(), cam.height());
    for (_, b) in layout.boxes_at(frame) {
        let corners = box_corners(b).map(|c| cam.world_to_camera(&c));
        for (i, j) in BOX_EDGES {
            if let Some((a, b)) = clip_segment_near(corners[i], corners[j]) {
                let pa = cam.project_camera_point(&a);
                let pb = cam.project_camera_point(&b);
                draw_segment(&mut mask, cam, (pa.u, pa.v), (pb.u, pb.v), 0.5 * thickness);
            }
        }
    }
    Ok(mask)
}

fn draw_segment(mask: &mut Mask, cam: &CameraFrame, a: (f64, f64), b: (f64, f64), radius: f64) {
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let x0 = (a.0.min(b.0) - radius).ceil().max(0.0);
    let x1 = (a.0.max(b.0) + radius).floor().min(w - 1.0);
    let y0 = (a.1.min(b.1) - radius).ceil().max(0.0);
    let y1 = (a.1.max(b.1) + radius).floor().min(h - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return;
    }
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let r2 = radius * radius;
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let p = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((p.0 * d.0 + p.1 * d.1) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = (p.0 - t * d.0, p.1 - t * d.1);
            if q.0 * q.0 + q.1 * q.1 <= r2 {
                mask.set(x, y, true);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, Pose, Vec3};
    use crate::layout::testutil::*;
    use crate::layout::Box3D;

    fn identity_cam(w: u32, h: u32) -> CameraFrame {
        CameraFrame::new(
            CameraIntrinsics::new(100.0, 100.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap(),
            Pose::identity(),
            0,
            "front",
        )
    }

    #[test]
    fn empty_layout_is_blank() {
        let layout = SceneLayout::new(1, [forward_camera(0, 96, 64, 80.0)], vec![]).unwrap();
        assert!(render_depth_boxes(&layout, 0, "front").unwrap().as_slice().iter().all(|&d| d == 0.0));
        assert_eq!(render_edge_mask(&layout, 0, "front", 2.0).unwrap().count(), 0);
        assert!(matches!(
            render_depth_boxes(&layout, 0, "rear"),
            Err(LayoutError::MissingCamera { .. })
        ));
    }

    #[test]
    fn fronto_parallel_face_reads_constant_depth() {
        // Camera looks down world +z (identity pose). A box whose near face sits
        // at z = 10: center z = 10 + 1, dims along z (height) = 2.
        let cam = identity_cam(200, 160);
        let b = Box3D::new(Vec3::new(0.0, 0.0, 11.0), Vec3::new(6.0, 4.0, 2.0), 0.0).unwrap();
        let layout = SceneLayout::new(1, [cam], vec![track("a", [(0, b)])]).unwrap();
        let img = render_depth_boxes(&layout, 0, "front").unwrap();
        let mut covered = 0;
        for y in 0..160 {
            for x in 0..200 {
                let d = img.get(x, y);
                if d > 0.0 {
                    covered += 1;
                    assert!((d - 10.0).abs() < 1e-4, "pixel ({x},{y}) = {d}");
                }
            }
        }
        // Near face spans ±3 m × ±2 m at 10 m -> 61 × 41 pixel centers.
        assert_eq!(covered, 61 * 41);
    }

    #[test]
    fn nearer_box_wins() {
        let cam = identity_cam(200, 160);
        let near = Box3D::new(Vec3::new(0.0, 0.0, 5.5), Vec3::new(1.0, 1.0, 1.0), 0.0).unwrap();
        let far = Box3D::new(Vec3::new(0.0, 0.0, 10.5), Vec3::new(4.0, 4.0, 1.0), 0.0).unwrap();
        let layout =
            SceneLayout::new(1, [cam], vec![track("far", [(0, far)]), track("near", [(0, near)])]).unwrap();
        let img = render_depth_boxes(&layout, 0, "front").unwrap();
        assert!((img.get(100, 80) - 5.0).abs() < 1e-5);
        assert!((img.get(100 + 15, 80) - 10.0).abs() < 1e-4);
    }

    #[test]
    fn box_behind_camera_draws_nothing() {
        let cam = forward_camera(0, 96, 64, 80.0);
        let layout = SceneLayout::new(1, [cam], vec![track("a", [(0, car_at(-20.0, 0.0))])]).unwrap();
        assert_eq!(render_edge_mask(&layout, 0, "front", 2.0).unwrap().count(), 0);
        assert!(render_depth_boxes(&layout, 0, "front").unwrap().as_slice().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn straddling_box_edges_are_clipped_not_dropped() {
        let cam = forward_camera(0, 96, 64, 40.0);
        let b = Box3D::new(Vec3::new(1.0, 0.0, 0.8), Vec3::new(6.0, 1.9, 1.6), 0.0).unwrap();
        let layout = SceneLayout::new(1, [cam], vec![track("a", [(0, b)])]).unwrap();
        assert!(render_edge_mask(&layout, 0, "front", 2.0).unwrap().count() > 0);
    }
}
