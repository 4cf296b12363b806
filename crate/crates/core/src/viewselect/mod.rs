//! Per-point viewpoint selection and view-stack assembly.

mod directions;
mod kmedoids;
mod stack;

use thiserror::Error;

use crate::render::Shading;

pub use directions::{sample_directions, ViewDirection};
pub use kmedoids::{kmedoids, kmedoids_directions, KMedoids};
pub use stack::{
    build_cameras, camera_up, render_view_stack, visibility_camera, visible_directions, ViewStack,
    ViewStackBuilder,
};

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("point {point} is not visible from any sampled direction")]
    ZeroVisibility { point: u32 },
    #[error("invalid view config: {0}")]
    InvalidConfig(String),
    #[error("sample index {index} out of range ({count} samples)")]
    UnknownPoint { index: usize, count: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("view stack io: {0}")]
    Io(#[from] std::io::Error),
    #[error("view stack manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewConfig {
    pub n_directions: usize,
    /// K.
    pub n_medoids: usize,
    /// Camera distances as fractions of the bounding-sphere radius (M of them).
    pub radii: Vec<f64>,
    /// L.
    pub n_inplane: usize,
    /// Side of each stored image.
    pub resolution: usize,
    /// Images are rendered at `resolution * supersample` and box-filtered down.
    pub supersample: usize,
    /// Side of the images used by the visibility pre-pass.
    pub visibility_resolution: usize,
    /// Radians.
    pub vertical_fov: f64,
    /// Field of view of the pre-pass cameras (radians). Narrow, so the
    /// pre-pass approximates parallel projection along each direction.
    pub visibility_fov: f64,
    /// Ball radius for point clouds, as a fraction of the bounding-sphere radius.
    pub ball_radius: f64,
    pub shading: Shading,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            n_directions: 150,
            n_medoids: 3,
            radii: vec![0.25, 0.5, 0.75],
            n_inplane: 4,
            resolution: 227,
            supersample: 1,
            visibility_resolution: 227,
            vertical_fov: 50f64.to_radians(),
            visibility_fov: 20f64.to_radians(),
            ball_radius: 0.02,
            shading: Shading::default(),
        }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<(), ViewError> {
        let bad = |m: String| Err(ViewError::InvalidConfig(m));
        if self.n_directions == 0 {
            return bad("n_directions must be at least 1".into());
        }
        if self.n_medoids == 0 || self.n_medoids > self.n_directions {
            return bad(format!("need 1 <= K <= n_directions, got K = {}", self.n_medoids));
        }
        if self.radii.is_empty() {
            return bad("radii must not be empty".into());
        }
        if self.radii.iter().any(|&r| !(r > 0.0 && r <= 2.0)) {
            return bad(format!("radii must lie in (0, 2]: {:?}", self.radii));
        }
        if self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("radii must be strictly increasing: {:?}", self.radii));
        }
        if self.n_inplane == 0 || self.n_inplane > 4 {
            return bad("n_inplane must be in 1..=4".into());
        }
        if self.resolution == 0 || self.supersample == 0 || self.visibility_resolution == 0 {
            return bad("resolutions must be positive".into());
        }
        for fov in [self.vertical_fov, self.visibility_fov] {
            if !(fov > 0.0 && fov < std::f64::consts::PI) {
                return bad("fields of view must lie in (0, pi)".into());
            }
        }
        if !(self.ball_radius > 0.0) {
            return bad("ball_radius must be positive".into());
        }
        Ok(())
    }

    /// K·M·L.
    pub fn images_per_point(&self) -> usize {
        self.n_medoids * self.radii.len() * self.n_inplane
    }
}
