//! Rigid poses, pinhole cameras and world/camera/image projection.
//!
//! Camera convention: +x right, +y down, +z forward along the optical axis.
//! World convention: +z up, yaw measured about +z with yaw = 0 facing +x.
//! Pixel `(col, row)` has its center at integer coordinates `(col, row)`.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Points at or closer than this camera-space depth are culled.
pub const NEAR_PLANE: f64 = 0.1;

const ORTHONORMAL_TOL: f64 = 1e-9;
/// Quaternions read from files are renormalized silently within this
/// tolerance and rejected beyond [`QUAT_REJECT_TOL`].
pub const QUAT_NORMALIZE_TOL: f64 = 1e-6;
pub const QUAT_REJECT_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (camera-space z = {z})")]
    BehindCamera { z: f64 },
    #[error("rotation is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("quaternion norm {norm} is too far from 1")]
    BadQuaternion { norm: f64 },
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
    #[error("homogeneous transform must end with row [0, 0, 0, 1]")]
    BadHomogeneousRow,
}

/// Rigid transform `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let deviation = orthonormal_deviation(&rotation);
        if deviation > ORTHONORMAL_TOL {
            return Err(GeometryError::NotOrthonormal { deviation });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// 4x4 homogeneous matrix, row-major semantics.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads 16 row-major floats. The rotation block is accepted verbatim when
    /// orthonormal within 1e-9, projected onto SO(3) when within 1e-3, and
    /// rejected otherwise.
    pub fn from_row_major(values: &[f64; 16]) -> Result<Self, GeometryError> {
        let bottom = [values[12], values[13], values[14], values[15]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::BadHomogeneousRow);
        }
        let rotation = Mat3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
            values[10],
        );
        let translation = Vec3::new(values[3], values[7], values[11]);
        let deviation = orthonormal_deviation(&rotation);
        if deviation <= ORTHONORMAL_TOL {
            return Ok(Self {
                rotation,
                translation,
            });
        }
        if deviation <= QUAT_REJECT_TOL {
            log::warn!("re-orthonormalizing camera rotation (deviation {deviation:e})");
            let fixed = Rotation3::from_matrix(&rotation).into_inner();
            return Ok(Self {
                rotation: fixed,
                translation,
            });
        }
        Err(GeometryError::NotOrthonormal { deviation })
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }
}

/// Largest absolute entry of `RᵀR − I`, or infinity when det(R) is not +1.
pub fn orthonormal_deviation(r: &Mat3) -> f64 {
    let gram = r.transpose() * r - Mat3::identity();
    let dev = gram.abs().max();
    let det_dev = (r.determinant() - 1.0).abs();
    if det_dev > 0.5 {
        f64::INFINITY
    } else {
        dev.max(det_dev)
    }
}

/// `a ∘ b`: apply `b` first, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn invert(p: &Pose) -> Pose {
    p.inverse()
}

/// Rotation about world +z.
pub fn yaw_rotation(yaw: f64) -> Mat3 {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn yaw_pose(yaw: f64, center: Vec3) -> Pose {
    Pose {
        rotation: yaw_rotation(yaw),
        translation: center,
    }
}

/// Camera pose at `eye` looking at `target`, with image-up as close to world
/// +z as possible. `None` when the view direction is (nearly) vertical.
pub fn look_at(eye: Vec3, target: Vec3) -> Option<Pose> {
    let z = (target - eye).try_normalize(1e-12)?;
    let x = z.cross(&Vec3::z()).try_normalize(1e-9)?;
    let y = z.cross(&x);
    Some(Pose {
        rotation: Mat3::from_columns(&[x, y, z]),
        translation: eye,
    })
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Normalizes a `(w, x, y, z)` quaternion read from a file.
pub fn normalize_quaternion(q: [f64; 4]) -> Result<UnitQuaternion<f64>, GeometryError> {
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_REJECT_TOL {
        return Err(GeometryError::BadQuaternion { norm });
    }
    let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    Ok(UnitQuaternion::from_quaternion(quat))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::BadIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(GeometryError::BadIntrinsics(format!(
                "cx={} outside (0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(GeometryError::BadIntrinsics(format!(
                "cy={} outside (0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub intrinsics: CameraIntrinsics,
    pub cam_to_world: Pose,
    pub frame_index: u32,
    pub camera_id: String,
}

/// A projected point: pixel coordinates plus camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraFrame {
    pub fn new(
        intrinsics: CameraIntrinsics,
        cam_to_world: Pose,
        frame_index: u32,
        camera_id: impl Into<String>,
    ) -> Self {
        Self {
            intrinsics,
            cam_to_world,
            frame_index,
            camera_id: camera_id.into(),
        }
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.cam_to_world.translation
    }

    /// Rotation taking world vectors into the camera frame.
    pub fn world_to_camera_rotation(&self) -> Mat3 {
        self.cam_to_world.rotation.transpose()
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        world_to_camera(p, self)
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.cam_to_world.transform_point(p)
    }

    /// Pinhole projection of a camera-space point (no near-plane check).
    pub fn project_camera_point(&self, pc: &Vec3) -> Projection {
        let k = &self.intrinsics;
        Projection {
            u: k.fx * pc.x / pc.z + k.cx,
            v: k.fy * pc.y / pc.z + k.cy,
            depth: pc.z,
        }
    }

    pub fn project(&self, p: &Vec3) -> Result<Projection, GeometryError> {
        project_point(p, self)
    }

    /// Back-projects a pixel with known camera-space depth into the world.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let pc = Vec3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        self.camera_to_world(&pc)
    }
}

pub fn world_to_camera(p: &Vec3, cam: &CameraFrame) -> Vec3 {
    let pose = &cam.cam_to_world;
    pose.rotation.transpose() * (p - pose.translation)
}

pub fn project_point(p: &Vec3, cam: &CameraFrame) -> Result<Projection, GeometryError> {
    let pc = world_to_camera(p, cam);
    if pc.z <= NEAR_PLANE {
        return Err(GeometryError::BehindCamera { z: pc.z });
    }
    Ok(cam.project_camera_point(&pc))
}

/// Clips the camera-space segment `a → b` against the near plane. Returns
/// `None` when the whole segment lies at or behind it.
pub fn clip_segment_near(a: Vec3, b: Vec3) -> Option<(Vec3, Vec3)> {
    let a_in = a.z > NEAR_PLANE;
    let b_in = b.z > NEAR_PLANE;
    match (a_in, b_in) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        _ => {
            // Nudge the clipped endpoint just past the plane so it stays projectable.
            let target = NEAR_PLANE * (1.0 + 1e-9);
            let t = (target - a.z) / (b.z - a.z);
            let mid = a + (b - a) * t;
            if a_in {
                Some((a, mid))
            } else {
                Some((mid, b))
            }
        }
    }
}
