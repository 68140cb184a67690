//! 3D IoU of yaw-rotated boxes: bird's-eye-view polygon intersection times
//! vertical overlap.

use crate::geometry::yaw_rotation;
use crate::layout::Box3D;

type P2 = (f64, f64);

fn footprint(b: &Box3D) -> [P2; 4] {
    let r = yaw_rotation(b.yaw);
    let (hl, hw) = (0.5 * b.dims.x, 0.5 * b.dims.y);
    // Counter-clockwise.
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(x, y)| {
        let v = r * crate::geometry::Vec3::new(x, y, 0.0);
        (v.x + b.center.x, v.y + b.center.y)
    })
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Sutherland–Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`.
fn clip_polygon(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out: Vec<P2> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(intersect(prev, cur, a, b));
                }
                out.push(cur);
            } else if prev_in {
                out.push(intersect(prev, cur, a, b));
            }
        }
    }
    out
}

fn intersect(p: P2, q: P2, a: P2, b: P2) -> P2 {
    let cp = cross(a, b, p);
    let cq = cross(a, b, q);
    let t = cp / (cp - cq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

fn area(poly: &[P2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let s: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - a.1 * b.0
        })
        .sum();
    0.5 * s.abs()
}

/// Area of the intersection of the two boxes' ground footprints.
pub fn bev_intersection(a: &Box3D, b: &Box3D) -> f64 {
    area(&clip_polygon(&footprint(a), &footprint(b)))
}

pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    let lo = (a.center.z - 0.5 * a.dims.z).max(b.center.z - 0.5 * b.dims.z);
    let hi = (a.center.z + 0.5 * a.dims.z).min(b.center.z + 0.5 * b.dims.z);
    let dz = (hi - lo).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let inter = bev_intersection(a, b) * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use std::f64::consts::PI;

    fn cube(x: f64, yaw: f64) -> Box3D {
        Box3D::new(Vec3::new(x, 0.0, 0.0), Vec3::repeat(1.0), yaw).unwrap()
    }

    #[test]
    fn basic_cases() {
        assert!((iou3d(&cube(0.0, 0.0), &cube(0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert_eq!(iou3d(&cube(0.0, 0.0), &cube(5.0, 0.0)), 0.0);
        assert!((iou3d(&cube(0.0, 0.0), &cube(0.5, 0.0)) - 1.0 / 3.0).abs() < 1e-12);
        // A cube rotated 45° in place: octagon of area 2(√2 − 1).
        let oct = 2.0 * (2f64.sqrt() - 1.0);
        assert!((iou3d(&cube(0.0, 0.0), &cube(0.0, PI / 4.0)) - oct / (2.0 - oct)).abs() < 1e-12);
    }

    #[test]
    fn vertical_offset_only() {
        let a = cube(0.0, 0.0);
        let mut b = a;
        b.center.z = 0.75;
        assert!((iou3d(&a, &b) - 0.25 / 1.75).abs() < 1e-12);
    }
}
