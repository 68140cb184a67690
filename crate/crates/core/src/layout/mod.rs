//! Scene-level 3D box layouts and the clip-selection rules used to build
//! training clips.

mod raster;

pub use raster::{render_depth_boxes, render_edge_mask, DEFAULT_EDGE_THICKNESS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{clip_segment_near, wrap_angle, yaw_rotation, CameraFrame, Vec3};
use crate::raster::Rect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("no camera `{camera}` for frame {frame}")]
    MissingCamera { frame: u32, camera: String },
    #[error("object `{object}` is not present in frame {frame}")]
    ObjectAbsent { object: String, frame: u32 },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObjectId(String),
    #[error("frame {frame} is outside the layout's {num_frames} frames")]
    FrameOutOfRange { frame: u32, num_frames: u32 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    Cyclist,
    Other,
}

/// Yaw-only oriented box. `dims` are (length along heading, width, height);
/// `center` is the geometric center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: Vec3,
    pub dims: Vec3,
    pub yaw: f64,
}

impl Box3D {
    pub fn new(center: Vec3, dims: Vec3, yaw: f64) -> Result<Self, LayoutError> {
        if !dims.iter().all(|d| *d > 0.0 && d.is_finite()) {
            return Err(LayoutError::InvalidBox(format!("dims {:?} must be positive", dims.as_slice())));
        }
        if !center.iter().all(|c| c.is_finite()) || !yaw.is_finite() {
            return Err(LayoutError::InvalidBox("non-finite center or yaw".into()));
        }
        Ok(Self {
            center,
            dims,
            yaw: wrap_angle(yaw),
        })
    }

    pub fn volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        box_corners(self)
    }
}

/// Corner order, in the box frame (+x forward, +y left, +z up): bottom face
/// front-left, rear-left, rear-right, front-right (counter-clockwise seen
/// from above), then the top face in the same order.
pub fn box_corners(b: &Box3D) -> [Vec3; 8] {
    let (hl, hw, hh) = (0.5 * b.dims.x, 0.5 * b.dims.y, 0.5 * b.dims.z);
    let rot = yaw_rotation(b.yaw);
    let footprint = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
    let mut out = [Vec3::zeros(); 8];
    for (i, &(x, y)) in footprint.iter().enumerate() {
        out[i] = rot * Vec3::new(x, y, -hh) + b.center;
        out[i + 4] = rot * Vec3::new(x, y, hh) + b.center;
    }
    out
}

/// Corner indices of the 12 box edges.
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Corner indices of the 6 faces, each listed around its perimeter.
pub const BOX_FACES: [[usize; 4]; 6] = [
    [0, 1, 2, 3],
    [4, 5, 6, 7],
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
];

/// Image-plane bounding rectangle of a box. Edges crossing the near plane are
/// clipped first, so partially visible boxes still get a rectangle; `None`
/// when the box lies entirely behind the near plane. Not clipped to the image.
pub fn projected_aabb(b: &Box3D, cam: &CameraFrame) -> Option<Rect> {
    let cam_corners = box_corners(b).map(|c| cam.world_to_camera(&c));
    let points = BOX_EDGES.iter().filter_map(|&(i, j)| clip_segment_near(cam_corners[i], cam_corners[j]));
    Rect::from_points(points.flat_map(|(a, b)| {
        let pa = cam.project_camera_point(&a);
        let pb = cam.project_camera_point(&b);
        [(pa.u, pa.v), (pb.u, pb.v)]
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    pub object_id: String,
    pub class: ObjectClass,
    pub boxes: BTreeMap<u32, Box3D>,
}

impl ObjectTrack {
    pub fn box_at(&self, frame: u32) -> Option<&Box3D> {
        self.boxes.get(&frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub num_frames: u32,
    pub cameras: BTreeMap<(u32, String), CameraFrame>,
    pub tracks: Vec<ObjectTrack>,
}

impl SceneLayout {
    /// Assembles a layout, checking id uniqueness, frame ranges and camera
    /// coverage of every referenced frame.
    pub fn new(
        num_frames: u32,
        cameras: impl IntoIterator<Item = CameraFrame>,
        tracks: Vec<ObjectTrack>,
    ) -> Result<Self, LayoutError> {
        let cameras = cameras
            .into_iter()
            .map(|c| ((c.frame_index, c.camera_id.clone()), c))
            .collect();
        let layout = Self {
            num_frames,
            cameras,
            tracks,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tracks {
            if !seen.insert(t.object_id.as_str()) {
                return Err(LayoutError::DuplicateObjectId(t.object_id.clone()));
            }
            self.check_track_frames(t)?;
        }
        for &(frame, _) in self.cameras.keys() {
            self.check_frame(frame)?;
        }
        for t in &self.tracks {
            for &f in t.boxes.keys() {
                if !self.cameras.keys().any(|(cf, _)| *cf == f) {
                    return Err(LayoutError::MissingCamera {
                        frame: f,
                        camera: "<any>".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_frame(&self, frame: u32) -> Result<(), LayoutError> {
        if frame >= self.num_frames {
            return Err(LayoutError::FrameOutOfRange {
                frame,
                num_frames: self.num_frames,
            });
        }
        Ok(())
    }

    pub(crate) fn check_track_frames(&self, t: &ObjectTrack) -> Result<(), LayoutError> {
        t.boxes.keys().try_for_each(|&f| self.check_frame(f))
    }

    pub fn camera(&self, frame: u32, camera_id: &str) -> Result<&CameraFrame, LayoutError> {
        self.cameras
            .get(&(frame, camera_id.to_string()))
            .ok_or_else(|| LayoutError::MissingCamera {
                frame,
                camera: camera_id.to_string(),
            })
    }

    pub fn track(&self, object_id: &str) -> Option<&ObjectTrack> {
        self.tracks.iter().find(|t| t.object_id == object_id)
    }

    pub fn boxes_at(&self, frame: u32) -> impl Iterator<Item = (&ObjectTrack, &Box3D)> {
        self.tracks
            .iter()
            .filter_map(move |t| t.box_at(frame).map(|b| (t, b)))
    }
}

/// Other objects in `frame` whose box center lies within `radius` of the
/// target's center, measured in the horizontal plane.
pub fn neighbors_within(
    layout: &SceneLayout,
    frame: u32,
    object_id: &str,
    radius: f64,
) -> Result<usize, LayoutError> {
    let target = layout
        .track(object_id)
        .and_then(|t| t.box_at(frame))
        .ok_or_else(|| LayoutError::ObjectAbsent {
            object: object_id.to_string(),
            frame,
        })?;
    Ok(layout
        .boxes_at(frame)
        .filter(|(t, b)| {
            t.object_id != object_id && horizontal_distance(&b.center, &target.center) <= radius
        })
        .count())
}

fn horizontal_distance(a: &Vec3, b: &Vec3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipParams {
    pub n: u32,
    pub min_height_px: f64,
    /// Windows are kept only while the neighbor count stays strictly below this.
    pub max_neighbors: usize,
    pub neighbor_radius_m: f64,
}

impl Default for ClipParams {
    fn default() -> Self {
        Self {
            n: 10,
            min_height_px: 40.0,
            max_neighbors: 2,
            neighbor_radius_m: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClipCandidate {
    pub object_id: String,
    pub start_frame: u32,
}

/// Enumerates every `(object, start)` window of `params.n` frames in which
/// the object is present, projects at least `min_height_px` tall (after
/// clipping to the image) and has fewer than `max_neighbors` neighbors.
/// Overlapping windows are all returned, sorted by object id then start.
pub fn select_clips(layout: &SceneLayout, camera_id: &str, params: &ClipParams) -> Vec<ClipCandidate> {
    assert!(params.n >= 1, "clip length must be at least one frame");
    let mut out = Vec::new();
    for track in &layout.tracks {
        let ok: Vec<bool> = (0..layout.num_frames)
            .map(|f| frame_qualifies(layout, track, f, camera_id, params))
            .collect();
        if layout.num_frames < params.n {
            continue;
        }
        for start in 0..=(layout.num_frames - params.n) {
            let window = &ok[start as usize..(start + params.n) as usize];
            if window.iter().all(|&q| q) {
                out.push(ClipCandidate {
                    object_id: track.object_id.clone(),
                    start_frame: start,
                });
            }
        }
    }
    out.sort();
    out
}

fn frame_qualifies(
    layout: &SceneLayout,
    track: &ObjectTrack,
    frame: u32,
    camera_id: &str,
    params: &ClipParams,
) -> bool {
    let (Some(b), Ok(cam)) = (track.box_at(frame), layout.camera(frame, camera_id)) else {
        return false;
    };
    let tall_enough = projected_aabb(b, cam)
        .and_then(|r| r.clip(cam.width(), cam.height()))
        .is_some_and(|r| r.height() >= params.min_height_px);
    tall_enough
        && neighbors_within(layout, frame, &track.object_id, params.neighbor_radius_m)
            .is_ok_and(|n| n < params.max_neighbors)
}
