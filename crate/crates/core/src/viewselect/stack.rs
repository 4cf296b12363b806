use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::geometry::{bounding_sphere, minimal_sphere, BoundingSphere, PointSample, TriangleMesh, Vec3};
use crate::render::{in_plane_rotate, Camera, Scene, ShadedImage};
use crate::seed::item_seed;

use super::{kmedoids_directions, sample_directions, ViewConfig, ViewDirection, ViewError};

/// Camera up vector for viewing direction `d`: world +z projected orthogonal
/// to `d`, or +x when `d` is (nearly) vertical.
pub fn camera_up(d: &Vec3) -> Vec3 {
    let d = d.normalize();
    for axis in [Vec3::z(), Vec3::x()] {
        let u = axis - d * d.dot(&axis);
        if u.norm() > 1e-3 {
            return u.normalize();
        }
    }
    unreachable!("+z and +x cannot both be parallel to a unit vector")
}

/// Camera for the visibility pre-pass. It sits outside the bounding sphere,
/// far enough that the whole sphere fits the field of view.
pub fn visibility_camera(sphere: &BoundingSphere, dir: &ViewDirection, config: &ViewConfig) -> Camera {
    let r = sphere.radius.max(1e-12);
    let dist = 1.05 * r / (config.visibility_fov * 0.5).sin();
    let d = dir.vector();
    Camera {
        eye: sphere.center + d * dist,
        target: sphere.center,
        up: camera_up(&d),
        vertical_fov: config.visibility_fov,
        resolution: config.visibility_resolution,
        near: (dist - 1.05 * r).max(1e-6 * dist),
        far: dist + 1.05 * r,
    }
}

/// For each sample, the indices of the directions it is visible from.
pub fn visible_directions(
    scene: Scene<'_>,
    sphere: &BoundingSphere,
    samples: &[PointSample],
    dirs: &[ViewDirection],
    config: &ViewConfig,
) -> Vec<Vec<u32>> {
    let per_dir: Vec<Vec<bool>> = dirs
        .par_iter()
        .map(|d| scene.visible(&visibility_camera(sphere, d, config), samples))
        .collect();
    (0..samples.len())
        .map(|i| (0..dirs.len() as u32).filter(|&j| per_dir[j as usize][i]).collect())
        .collect()
}

/// One camera per (direction, radius), direction-major. Each looks at the
/// point from `radius · R` away along the direction.
pub fn build_cameras(
    point: &PointSample,
    medoid_dirs: &[ViewDirection],
    sphere: &BoundingSphere,
    config: &ViewConfig,
) -> Vec<Camera> {
    let big_r = sphere.radius;
    let mut cams = Vec::with_capacity(medoid_dirs.len() * config.radii.len());
    for d in medoid_dirs {
        let d = d.vector();
        for &frac in &config.radii {
            let dist = frac * big_r;
            cams.push(Camera {
                eye: point.position + d * dist,
                target: point.position,
                up: camera_up(&d),
                vertical_fov: config.vertical_fov,
                resolution: config.resolution * config.supersample,
                near: 0.01 * dist,
                far: dist + 2.2 * big_r,
            });
        }
    }
    cams
}

/// The K·M·L images describing one point. Image order is an implementation
/// detail; consumers treat the images as a set.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewStack {
    pub point_id: u32,
    pub images: Vec<ShadedImage>,
    /// The K·M generating cameras.
    pub cameras: Vec<Camera>,
    /// Generating camera of each image.
    pub image_camera: Vec<usize>,
    /// Quarter turns applied to each image.
    pub image_rotation: Vec<u8>,
    /// Whether the point was confirmed unoccluded in every base view.
    pub verified: bool,
}

const MANIFEST: &str = "manifest.txt";

impl ViewStack {
    /// Writes one PGM per image plus a manifest describing its camera.
    pub fn save(&self, dir: &Path) -> Result<(), ViewError> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::from(
            "# point image camera rotation eye_x eye_y eye_z target_x target_y target_z up_x up_y up_z fov resolution near far verified file\n",
        );
        for (i, img) in self.images.iter().enumerate() {
            let file = format!("view_{i:03}.pgm");
            let mut bytes = Vec::new();
            img.write_pgm(&mut bytes)?;
            fs::write(dir.join(&file), bytes)?;
            let c = &self.cameras[self.image_camera[i]];
            let _ = writeln!(
                manifest,
                "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
                self.point_id,
                i,
                self.image_camera[i],
                self.image_rotation[i],
                c.eye.x, c.eye.y, c.eye.z,
                c.target.x, c.target.y, c.target.z,
                c.up.x, c.up.y, c.up.z,
                c.vertical_fov,
                c.resolution,
                c.near,
                c.far,
                self.verified as u8,
                file
            );
        }
        fs::write(dir.join(MANIFEST), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ViewError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let mut stack = ViewStack {
            point_id: 0,
            images: Vec::new(),
            cameras: Vec::new(),
            image_camera: Vec::new(),
            image_rotation: Vec::new(),
            verified: true,
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| ViewError::Manifest { line: ln + 1, message: message.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 19 {
                return Err(bad("expected 19 fields"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("bad number"));
            let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad("bad integer"));
            stack.point_id = int(0)? as u32;
            let cam_idx = int(2)?;
            let cam = Camera {
                eye: Vec3::new(num(4)?, num(5)?, num(6)?),
                target: Vec3::new(num(7)?, num(8)?, num(9)?),
                up: Vec3::new(num(10)?, num(11)?, num(12)?),
                vertical_fov: num(13)?,
                resolution: int(14)?,
                near: num(15)?,
                far: num(16)?,
            };
            if cam_idx == stack.cameras.len() {
                stack.cameras.push(cam);
            } else if cam_idx > stack.cameras.len() {
                return Err(bad("camera indices must appear in order"));
            }
            stack.image_camera.push(cam_idx);
            stack.image_rotation.push(int(3)? as u8);
            stack.verified &= f[17] == "1";
            let bytes = fs::read(dir.join(f[18]))?;
            stack.images.push(ShadedImage::read_pgm(&bytes[..])?);
        }
        Ok(stack)
    }
}

/// Shape-level view selection state: the directions and the visibility
/// pre-pass, computed once and shared by every point of the shape.
pub struct ViewStackBuilder<'a> {
    scene: Scene<'a>,
    sphere: BoundingSphere,
    samples: &'a [PointSample],
    dirs: Vec<ViewDirection>,
    visibility: Vec<Vec<u32>>,
    config: ViewConfig,
    seed: u64,
}

impl<'a> ViewStackBuilder<'a> {
    /// Runs the visibility pre-pass for `samples` (which must lie on the
    /// scene). For clouds the scene's ball radius is absolute; see
    /// [`ViewConfig::ball_radius`] for the conventional choice.
    pub fn new(
        scene: Scene<'a>,
        samples: &'a [PointSample],
        config: ViewConfig,
        seed: u64,
    ) -> Result<Self, ViewError> {
        config.validate()?;
        let sphere = match scene {
            Scene::Mesh(mesh) => bounding_sphere(mesh)?,
            Scene::Cloud { cloud, ball_radius } => {
                if cloud.points.is_empty() {
                    return Err(crate::geometry::GeometryError::EmptyInput.into());
                }
                let s = minimal_sphere(&cloud.points);
                BoundingSphere { center: s.center, radius: s.radius + ball_radius }
            }
        };
        let dirs = sample_directions(config.n_directions);
        let visibility = visible_directions(scene, &sphere, samples, &dirs, &config);
        Ok(Self { scene, sphere, samples, dirs, visibility, config, seed })
    }

    pub fn sphere(&self) -> &BoundingSphere {
        &self.sphere
    }

    pub fn config(&self) -> &ViewConfig {
        &self.config
    }

    pub fn directions(&self) -> &[ViewDirection] {
        &self.dirs
    }

    /// Visible direction indices per sample.
    pub fn visibility(&self) -> &[Vec<u32>] {
        &self.visibility
    }

    fn render(&self, sample: &PointSample, cam: &Camera) -> (ShadedImage, bool) {
        let (img, vis) =
            self.scene.render_with_visibility(cam, &cam.forward(), &self.config.shading, std::slice::from_ref(sample));
        (img.resampled(self.config.resolution), vis[0])
    }

    /// Renders (once) the M base views of `sample` along direction `d`.
    fn views<'c>(
        &self,
        cache: &'c mut HashMap<u32, Vec<(ShadedImage, bool)>>,
        sample: &PointSample,
        d: u32,
    ) -> &'c [(ShadedImage, bool)] {
        cache.entry(d).or_insert_with(|| {
            build_cameras(sample, &[self.dirs[d as usize]], &self.sphere, &self.config)
                .iter()
                .map(|cam| self.render(sample, cam))
                .collect()
        })
    }

    /// Selects K directions for sample `index` and renders its stack.
    ///
    /// Medoids whose point is occluded at any camera radius are discarded
    /// and the clustering is rerun on the remaining directions. If every
    /// candidate fails, the unfiltered medoids are used and the stack is
    /// marked unverified. With fewer than K candidates the medoids repeat.
    pub fn stack(&self, index: usize) -> Result<ViewStack, ViewError> {
        let sample = self
            .samples
            .get(index)
            .ok_or(ViewError::UnknownPoint { index, count: self.samples.len() })?;
        let visible = &self.visibility[index];
        if visible.is_empty() {
            return Err(ViewError::ZeroVisibility { point: index as u32 });
        }
        let cfg = &self.config;
        let k = cfg.n_medoids;
        let m = cfg.radii.len();
        let seed = item_seed(self.seed, index as u64);
        let medoids_of = |cands: &[u32]| -> Vec<u32> {
            let dirs: Vec<ViewDirection> = cands.iter().map(|&c| self.dirs[c as usize]).collect();
            kmedoids_directions(&dirs, k.min(cands.len()), seed)
                .medoids
                .iter()
                .map(|&i| cands[i])
                .collect()
        };

        let mut cache: HashMap<u32, Vec<(ShadedImage, bool)>> = HashMap::new();
        let mut candidates = visible.clone();
        let (chosen, verified) = loop {
            if candidates.is_empty() {
                break (medoids_of(visible), false);
            }
            let chosen = medoids_of(&candidates);
            let failed: Vec<u32> =
                chosen.iter().copied().filter(|&d| self.views(&mut cache, sample, d).iter().any(|(_, vis)| !vis)).collect();
            if failed.is_empty() {
                break (chosen, true);
            }
            candidates.retain(|c| !failed.contains(c));
        };

        let slots: Vec<u32> = (0..k).map(|s| chosen[s % chosen.len()]).collect();
        let slot_dirs: Vec<ViewDirection> = slots.iter().map(|&d| self.dirs[d as usize]).collect();
        let mut cameras = build_cameras(sample, &slot_dirs, &self.sphere, cfg);
        for c in &mut cameras {
            c.resolution = cfg.resolution;
        }
        let mut stack = ViewStack {
            point_id: index as u32,
            images: Vec::with_capacity(cfg.images_per_point()),
            cameras,
            image_camera: Vec::new(),
            image_rotation: Vec::new(),
            verified,
        };
        for (s, &d) in slots.iter().enumerate() {
            let views = self.views(&mut cache, sample, d);
            for (r, (img, _)) in views.iter().enumerate() {
                for q in 0..cfg.n_inplane as u8 {
                    stack.images.push(in_plane_rotate(img, q));
                    stack.image_camera.push(s * m + r);
                    stack.image_rotation.push(q);
                }
            }
        }
        Ok(stack)
    }

    /// Stacks for several samples, in the order given.
    pub fn stacks(&self, indices: &[usize]) -> Vec<Result<ViewStack, ViewError>> {
        indices.par_iter().map(|&i| self.stack(i)).collect()
    }
}

/// Convenience wrapper: pre-pass over `samples`, then the stack of one of them.
pub fn render_view_stack(
    mesh: &TriangleMesh,
    samples: &[PointSample],
    index: usize,
    config: &ViewConfig,
    seed: u64,
) -> Result<ViewStack, ViewError> {
    ViewStackBuilder::new(Scene::Mesh(mesh), samples, config.clone(), seed)?.stack(index)
}
