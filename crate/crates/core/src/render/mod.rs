//! Headless software rasterizer: shaded images, sample index maps and
//! point-cloud ball rendering from perspective cameras.

mod camera;
mod image;
mod points;
mod raster;
mod scene;

use thiserror::Error;

pub use camera::{Camera, Projection};
pub use image::{in_plane_rotate, ShadedImage};
pub use points::render_point_cloud;
pub use raster::{rasterize, render_index, render_shaded, DepthBuffer, IndexEntry, IndexMap};
pub use scene::Scene;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Phong coefficients. Training and inference must use identical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shading {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for Shading {
    fn default() -> Self {
        Self {
            ambient: 0.1,
            diffuse: 0.7,
            specular: 0.2,
            shininess: 16.0,
        }
    }
}
