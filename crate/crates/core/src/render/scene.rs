use crate::geometry::{PointCloud, PointSample, TriangleMesh, Vec3};

use super::points::{shade_splats, splat};
use super::raster::{rasterize, render_index, shade_buffer};
use super::{Camera, ShadedImage, Shading};

/// Something that can be rendered and tested for sample visibility.
#[derive(Debug, Clone, Copy)]
pub enum Scene<'a> {
    Mesh(&'a TriangleMesh),
    /// Points drawn as balls of `ball_radius`.
    Cloud { cloud: &'a PointCloud, ball_radius: f64 },
}

impl Scene<'_> {
    pub fn render(&self, cam: &Camera, light_dir: &Vec3, shading: &Shading) -> ShadedImage {
        self.render_with_visibility(cam, light_dir, shading, &[]).0
    }

    /// Which samples are visible from `cam`.
    pub fn visible(&self, cam: &Camera, samples: &[PointSample]) -> Vec<bool> {
        match self {
            Scene::Mesh(mesh) => {
                mask(samples.len(), render_index(mesh, samples, cam).visible())
            }
            Scene::Cloud { cloud, ball_radius } => {
                let splats = splat(cloud, cam, *ball_radius);
                cloud_visibility(&splats.depth, cam, samples, *ball_radius)
            }
        }
    }

    /// One rasterization serving both the shaded image and visibility.
    pub fn render_with_visibility(
        &self,
        cam: &Camera,
        light_dir: &Vec3,
        shading: &Shading,
        samples: &[PointSample],
    ) -> (ShadedImage, Vec<bool>) {
        match self {
            Scene::Mesh(mesh) => {
                let buf = rasterize(mesh, cam);
                let img = shade_buffer(mesh, cam, &buf, light_dir, shading);
                let vis = mask(samples.len(), render_index(mesh, samples, cam).visible());
                (img, vis)
            }
            Scene::Cloud { cloud, ball_radius } => {
                let splats = splat(cloud, cam, *ball_radius);
                let vis = cloud_visibility(&splats.depth, cam, samples, *ball_radius);
                (shade_splats(&splats, cam, light_dir, shading), vis)
            }
        }
    }
}

fn mask(n: usize, visible: &[u32]) -> Vec<bool> {
    let mut out = vec![false; n];
    for &i in visible {
        out[i as usize] = true;
    }
    out
}

/// A cloud sample is visible when the front of its own ball is within one
/// ball radius (plus the depth epsilon) of the nearest splat at its pixel.
fn cloud_visibility(depth: &[f64], cam: &Camera, samples: &[PointSample], ball_radius: f64) -> Vec<bool> {
    let res = cam.resolution;
    samples
        .iter()
        .map(|s| {
            let Some(p) = cam.project(&s.position) else { return false };
            if p.depth < cam.near || p.depth > cam.far {
                return false;
            }
            let Some((r, c)) = p.pixel(res) else { return false };
            p.depth - ball_radius <= depth[r * res + c] + ball_radius + cam.depth_epsilon()
        })
        .collect()
}
