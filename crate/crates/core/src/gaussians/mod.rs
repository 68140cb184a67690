//! 3D Gaussian assets: local-to-world placement, EWA projection and
//! front-to-back alpha compositing.

mod ply;
mod project;
mod render;

pub use ply::{load_asset, load_asset_with, write_asset, PlyConvention, PlyError};
pub use project::{project_gaussian, Splat2D};
pub use render::{project_sorted, render, render_naive, render_with, RenderConfig, RenderedFrame};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use thiserror::Error;

use crate::geometry::{Mat3, Pose, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("cloud is already in the world frame")]
    WrongFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Local,
    World,
}

/// One anisotropic Gaussian. `scale` holds per-axis standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub scale: Vec3,
    pub opacity: f64,
    pub color: [f64; 3],
}

impl Gaussian3D {
    pub fn isotropic(mean: Vec3, sigma: f64, opacity: f64, color: [f64; 3]) -> Self {
        Self {
            mean,
            rotation: UnitQuaternion::identity(),
            scale: Vec3::repeat(sigma),
            opacity,
            color,
        }
    }

    /// Σ = R S Sᵀ Rᵀ.
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation.to_rotation_matrix().into_inner();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian3D>,
    pub frame: Frame,
}

impl GaussianCloud {
    pub fn local(gaussians: Vec<Gaussian3D>) -> Self {
        Self {
            gaussians,
            frame: Frame::Local,
        }
    }

    pub fn world(gaussians: Vec<Gaussian3D>) -> Self {
        Self {
            gaussians,
            frame: Frame::World,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }
}

/// Moves a local-frame cloud into the world: `μ_w = Wμ + T`, and the
/// orientation is left-multiplied by `W` so that `Σ_w = W Σ Wᵀ`.
pub fn transform_cloud(cloud: &GaussianCloud, pose: &Pose) -> Result<GaussianCloud, GaussianError> {
    if cloud.frame != Frame::Local {
        return Err(GaussianError::WrongFrame);
    }
    let w = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(pose.rotation));
    let gaussians = cloud
        .gaussians
        .iter()
        .map(|g| Gaussian3D {
            mean: pose.transform_point(&g.mean),
            rotation: w * g.rotation,
            scale: g.scale,
            opacity: g.opacity,
            color: g.color,
        })
        .collect();
    Ok(GaussianCloud::world(gaussians))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::yaw_pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian3D {
        let q = nalgebra::Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Gaussian3D {
            mean: Vec3::new(rng.random(), rng.random(), rng.random()),
            rotation: UnitQuaternion::from_quaternion(q),
            scale: Vec3::new(
                rng.random_range(0.01..1.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.01..1.0),
            ),
            opacity: rng.random_range(0.1..1.0),
            color: [rng.random(), rng.random(), rng.random()],
        }
    }

    /// Σ assembled entry by entry from the quaternion, no matrix library.
    fn dense_covariance(g: &Gaussian3D) -> [[f64; 3]; 3] {
        let q = g.rotation.quaternion();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let r = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        let s = [g.scale.x, g.scale.y, g.scale.z];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += r[i][k] * s[k] * s[k] * r[j][k];
                }
            }
        }
        out
    }

    fn sandwich(w: &[[f64; 3]; 3], s: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        out[i][j] += w[i][k] * s[k][l] * w[j][l];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_pose_only_changes_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = GaussianCloud::local((0..10).map(|_| random_gaussian(&mut rng)).collect());
        let world = transform_cloud(&cloud, &Pose::identity()).unwrap();
        assert_eq!(world.frame, Frame::World);
        for (a, b) in cloud.gaussians.iter().zip(&world.gaussians) {
            assert_eq!(a.mean, b.mean);
            assert!(a.rotation.angle_to(&b.rotation) < 1e-12);
        }
        assert_eq!(transform_cloud(&world, &Pose::identity()), Err(GaussianError::WrongFrame));
    }

    #[test]
    fn translation_shifts_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = GaussianCloud::local((0..10).map(|_| random_gaussian(&mut rng)).collect());
        let t = Vec3::new(1.0, 2.0, 3.0);
        let world = transform_cloud(&cloud, &Pose::from_translation(t)).unwrap();
        for (a, b) in cloud.gaussians.iter().zip(&world.gaussians) {
            assert_eq!(b.mean, a.mean + t);
            assert_eq!(a.rotation, b.rotation);
        }
    }

    #[test]
    fn quarter_yaw_covariance_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pose = yaw_pose(FRAC_PI_2, Vec3::zeros());
        let w = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..20 {
            let g = random_gaussian(&mut rng);
            let cloud = GaussianCloud::local(vec![g.clone()]);
            let world = transform_cloud(&cloud, &pose).unwrap();
            let expected = sandwich(&w, &dense_covariance(&g));
            let got = world.gaussians[0].covariance();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((got[(i, j)] - expected[i][j]).abs() < 1e-9);
                }
            }
        }
    }
}
