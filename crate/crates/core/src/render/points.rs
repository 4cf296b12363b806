use crate::geometry::{PointCloud, Vec3};

use super::raster::phong;
use super::{Camera, Shading, ShadedImage};

/// Nearest ball surface per pixel for a point cloud.
pub(crate) struct Splats {
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
}

pub(crate) fn splat(cloud: &PointCloud, cam: &Camera, ball_radius: f64) -> Splats {
    let res = cam.resolution;
    let mut depth = vec![f64::INFINITY; res * res];
    let mut normal = vec![Vec3::zeros(); res * res];
    let focal = res as f64 / (2.0 * cam.tan_half_fov());

    for (i, p) in cloud.points.iter().enumerate() {
        let Some(proj) = cam.project(p) else { continue };
        if proj.depth < cam.near || proj.depth > cam.far {
            continue;
        }
        let radius_px = focal * ball_radius / proj.depth;
        let n = match &cloud.normals {
            Some(ns) => ns[i],
            None => (cam.eye - p).normalize(),
        };
        let r0 = (proj.row - radius_px - 0.5).ceil().max(0.0) as usize;
        let c0 = (proj.col - radius_px - 0.5).ceil().max(0.0) as usize;
        let r1 = (proj.row + radius_px - 0.5).floor();
        let c1 = (proj.col + radius_px - 0.5).floor();
        if r1 < 0.0 || c1 < 0.0 {
            continue;
        }
        let r1 = (r1 as usize).min(res - 1);
        let c1 = (c1 as usize).min(res - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let dy = r as f64 + 0.5 - proj.row;
                let dx = c as f64 + 0.5 - proj.col;
                let rho2 = (dx * dx + dy * dy) / (radius_px * radius_px);
                if rho2 > 1.0 {
                    continue;
                }
                let z = proj.depth - ball_radius * (1.0 - rho2).sqrt();
                let idx = r * res + c;
                if z < depth[idx] {
                    depth[idx] = z;
                    normal[idx] = n;
                }
            }
        }
    }
    Splats { depth, normal }
}

pub(crate) fn shade_splats(splats: &Splats, cam: &Camera, light_dir: &Vec3, shading: &Shading) -> ShadedImage {
    let res = cam.resolution;
    let to_light = -light_dir.normalize();
    let mut img = ShadedImage::blank(res);
    for r in 0..res {
        for c in 0..res {
            let idx = r * res + c;
            if splats.depth[idx].is_finite() {
                let to_viewer = -cam.pixel_ray(r, c).normalize();
                img.set(r, c, phong(shading, &splats.normal[idx], &to_light, &to_viewer));
            }
        }
    }
    img
}

/// Renders each point as a small ball: a screen-space disc whose depth
/// follows the front hemisphere of a sphere of `ball_radius`.
///
/// Points with normals are shaded with them; otherwise each ball faces the
/// camera.
pub fn render_point_cloud(
    cloud: &PointCloud,
    cam: &Camera,
    ball_radius: f64,
    light_dir: &Vec3,
    shading: &Shading,
) -> ShadedImage {
    shade_splats(&splat(cloud, cam, ball_radius), cam, light_dir, shading)
}
